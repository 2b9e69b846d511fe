#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "fedmua/aggregation.hpp"
#include "fedmua/error.hpp"
#include "fedmua/model.hpp"
#include "fedmua/partition.hpp"
#include "fedmua/threading.hpp"

namespace fedmua {

struct FederationConfig {
    int num_clients = 2;
    int clients_per_round = 2;
    int rounds = 1;
    int local_epochs = 1;
    int batch_size = 32;
    double learning_rate = 0.1;
    double momentum = 0.0;
    AggregationRule aggregation = AggregationRule::fedavg();
    std::uint64_t seed = 0;

    void validate() const {
        require(num_clients >= 1, "FederationConfig: num_clients must be >= 1");
        require(clients_per_round >= 1 && clients_per_round <= num_clients,
                "FederationConfig: clients_per_round out of range");
        require(rounds >= 0, "FederationConfig: rounds must be nonnegative");
        require(local_epochs >= 1, "FederationConfig: local_epochs must be >= 1");
        require(batch_size >= 1, "FederationConfig: batch_size must be >= 1");
        require(learning_rate >= 0.0, "FederationConfig: learning_rate must be nonnegative");
        require(momentum >= 0.0 && momentum < 1.0, "FederationConfig: momentum must be in [0,1)");
        if (rule_is(AggregationRule::Kind::trimmed_mean))
            require(2 * aggregation.k < clients_per_round,
                    "FederationConfig: trimmed_mean needs 2k < clients_per_round");
        if (rule_is(AggregationRule::Kind::krum))
            require(clients_per_round - aggregation.k - 2 >= 1,
                    "FederationConfig: krum needs clients_per_round - m - 2 >= 1");
    }

    bool rule_is(AggregationRule::Kind k) const { return aggregation.kind == k; }
};

// Everything the server saw in one round: who participated, their update
// deltas, the per-client update magnitudes, and the global model before and
// after aggregation.
struct RoundRecord {
    int round_index = 0;
    std::vector<int> participant_ids;  // ascending
    std::map<int, ParamVector> client_updates;
    std::map<int, double> gradient_norms;  // sum of per-layer l2 norms
    ParamVector global_before;
    ParamVector global_after;
};

struct HistoryArchive {
    std::vector<RoundRecord> records;
    FederationConfig config;
    ModelSpec model_spec;

    const ParamVector& final_global() const {
        require(!records.empty(), "HistoryArchive: no rounds recorded");
        return records.back().global_after;
    }
};

// Optional per-round interception of the updates right before aggregation
// (this is where the gradient-norm defense plugs in).
using UpdateFilter =
    std::function<void(int round, const std::vector<int>& participants, std::vector<ParamVector>& updates)>;

// Mini-batch SGD with momentum starting from global_params; returns the
// local-minus-global delta. Batch order comes entirely from the seed, so the
// call is reproducible and safe to run concurrently with other clients.
inline ParamVector local_train(const ModelSpec& spec, const ParamVector& global_params,
                               const Batch& client_dataset, int epochs, int batch_size, double lr,
                               double momentum, std::uint64_t seed) {
    require(!client_dataset.empty(), "local_train: empty client dataset");
    require(epochs >= 1 && batch_size >= 1, "local_train: bad epochs/batch_size");

    ParamVector w = global_params;
    ParamVector velocity = ParamVector::zeros_like(global_params);
    auto eng = make_engine(seed);
    std::vector<std::size_t> order(client_dataset.size());
    std::iota(order.begin(), order.end(), 0);

    Batch batch;
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), eng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(client_dataset[order[i]]);
            auto grad = loss_and_grad(spec, w, batch).second;
            scale(velocity, momentum);
            axpy(1.0, grad, velocity);
            axpy(-lr, velocity, w);
        }
    }
    axpy(-1.0, global_params, w);
    return w;
}

// Seeded choice of clients_per_round distinct client ids, reported ascending.
inline std::vector<int> sample_participants(const FederationConfig& cfg, int round) {
    std::vector<int> ids(static_cast<std::size_t>(cfg.num_clients));
    std::iota(ids.begin(), ids.end(), 0);
    auto eng = make_engine(derive_seed(cfg.seed, stream::participants, static_cast<std::uint64_t>(round)));
    std::shuffle(ids.begin(), ids.end(), eng);
    ids.resize(static_cast<std::size_t>(cfg.clients_per_round));
    std::sort(ids.begin(), ids.end());
    return ids;
}

inline std::uint64_t client_round_seed(std::uint64_t base, int round, int client) {
    return derive_seed(base, stream::local_train, static_cast<std::uint64_t>(round),
                       static_cast<std::uint64_t>(client));
}

// Runs the full federated loop and archives every round. The result is
// bitwise reproducible from (config, spec, dataset, partition); the filter,
// when present, is applied to the updates before aggregation and the archive
// stores what was actually aggregated.
inline std::pair<ParamVector, HistoryArchive> run_federation(const FederationConfig& config,
                                                             const ModelSpec& spec,
                                                             const Dataset& dataset,
                                                             const Partition& part,
                                                             const UpdateFilter& filter = {}) {
    config.validate();
    spec.validate();
    require(part.num_clients() == config.num_clients,
            "run_federation: partition does not match num_clients");
    require(spec.input_dim == dataset.feature_dim && spec.class_count == dataset.class_count,
            "run_federation: model spec does not match dataset");

    std::vector<Batch> shards(static_cast<std::size_t>(config.num_clients));
    for (int c = 0; c < config.num_clients; ++c) shards[static_cast<std::size_t>(c)] = shard_of(dataset, part, c);

    HistoryArchive archive;
    archive.config = config;
    archive.model_spec = spec;

    ParamVector global = init_params(spec, config.seed);
    for (int round = 0; round < config.rounds; ++round) {
        RoundRecord rec;
        rec.round_index = round;
        rec.participant_ids = sample_participants(config, round);
        rec.global_before = global;

        std::vector<ParamVector> updates(rec.participant_ids.size());
        parallel_for(rec.participant_ids.size(), [&](std::size_t i) {
            const int client = rec.participant_ids[i];
            updates[i] = local_train(spec, global, shards[static_cast<std::size_t>(client)],
                                     config.local_epochs, config.batch_size, config.learning_rate,
                                     config.momentum, client_round_seed(config.seed, round, client));
        });

        if (filter) filter(round, rec.participant_ids, updates);

        for (std::size_t i = 0; i < updates.size(); ++i) {
            rec.client_updates[rec.participant_ids[i]] = updates[i];
            rec.gradient_norms[rec.participant_ids[i]] = layer_norm_sum(updates[i]);
        }

        const ParamVector agg = aggregate(config.aggregation, updates);
        axpy(1.0, agg, global);
        require(global.all_finite(), "run_federation: non-finite global model");
        rec.global_after = global;
        archive.records.push_back(std::move(rec));
    }
    return {global, std::move(archive)};
}

}  // namespace fedmua
