#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/federation.hpp"

namespace fedmua {

enum class UnlearnMode { federaser, retrain };

// A client's request to forget specific records. The payload is whatever the
// client submits; the server does not verify membership against the shard it
// has on file.
struct UnlearnRequest {
    int client_id = 0;
    Batch forget_set;
    UnlearnMode mode = UnlearnMode::federaser;

    void validate() const {
        require(!forget_set.empty(), "UnlearnRequest: forget_set must be nonempty");
    }
};

struct UnlearnOutcome {
    ParamVector unlearned_global;
    int calibration_rounds_used = 0;
    long long wall_steps = 0;      // SGD batches plus unlearn steps executed
    int zero_norm_skips = 0;       // rounds where a zero-norm calibration fell back to the stored update
};

// Knobs for the calibrated replay. The defaults are the honest server-side
// procedure: recompute the requester's update on its remaining records and
// keep the stored update's norm. A requester may submit its own unlearning
// parameters with the request (`unlearn_rate` > 0 adds gradient-ascent steps
// on the forget payload, `preserve_norm` = false sends the recomputed update
// unnormalized); the server applies them as given, which is precisely the
// trust gap the attack walks through.
struct CalibrationOptions {
    int calibration_epochs = 1;
    double calibration_lr = -1.0;  // < 0 means: use the training learning rate
    bool preserve_norm = true;
    double unlearn_rate = 0.0;     // ascent strength relative to calibration_lr
};

namespace detail {

// Removes one shard occurrence per forget item (exact feature/label match).
// Returns the surviving index list and how many items failed to match.
inline std::pair<std::vector<std::size_t>, std::size_t> remove_matches(
    const Dataset& dataset, const std::vector<std::size_t>& indices, const Batch& forget) {
    std::vector<char> removed(indices.size(), 0);
    std::size_t misses = 0;
    for (const auto& item : forget) {
        bool hit = false;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (removed[i]) continue;
            if (dataset.examples[indices[i]] == item) {
                removed[i] = 1;
                hit = true;
                break;
            }
        }
        if (!hit) ++misses;
    }
    std::vector<std::size_t> kept;
    kept.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (!removed[i]) kept.push_back(indices[i]);
    return {std::move(kept), misses};
}

inline long long batches_per_epoch(std::size_t n, int batch_size) {
    return static_cast<long long>((n + static_cast<std::size_t>(batch_size) - 1) /
                                  static_cast<std::size_t>(batch_size));
}

}  // namespace detail

// Ground-truth unlearning: rerun the whole federation with identical
// config and seeds, minus the forgotten records. Every forget item must
// resolve against the requesting client's shard.
inline UnlearnOutcome retrain_oracle(const HistoryArchive& archive, const Dataset& dataset,
                                     const Partition& part,
                                     const std::vector<UnlearnRequest>& requests) {
    for (const auto& r : requests) r.validate();

    std::vector<Batch> shards(static_cast<std::size_t>(archive.config.num_clients));
    std::map<int, std::vector<std::size_t>> kept_indices;
    for (const auto& [client, idxs] : part.assignments) kept_indices[client] = idxs;

    for (const auto& req : requests) {
        auto it = kept_indices.find(req.client_id);
        require(it != kept_indices.end(), "retrain_oracle: unknown client in request");
        auto [kept, misses] = detail::remove_matches(dataset, it->second, req.forget_set);
        if (misses > 0)
            throw unresolvable_request_error("retrain_oracle: " + std::to_string(misses) +
                                             " forget item(s) not found in client " +
                                             std::to_string(req.client_id) + "'s shard");
        it->second = std::move(kept);
    }

    for (const auto& [client, idxs] : kept_indices) {
        auto& shard = shards[static_cast<std::size_t>(client)];
        shard.reserve(idxs.size());
        for (auto i : idxs) shard.push_back(dataset.examples[i]);
    }

    const auto& cfg = archive.config;
    ParamVector global = init_params(archive.model_spec, cfg.seed);
    long long steps = 0;
    for (int round = 0; round < cfg.rounds; ++round) {
        const auto participants = sample_participants(cfg, round);
        std::vector<ParamVector> updates(participants.size());
        parallel_for(participants.size(), [&](std::size_t i) {
            const int client = participants[i];
            const auto& shard = shards[static_cast<std::size_t>(client)];
            // A fully forgotten shard contributes nothing.
            updates[i] = shard.empty()
                             ? ParamVector::zeros_like(global)
                             : local_train(archive.model_spec, global, shard, cfg.local_epochs,
                                           cfg.batch_size, cfg.learning_rate, cfg.momentum,
                                           client_round_seed(cfg.seed, round, client));
        });
        for (std::size_t i = 0; i < participants.size(); ++i) {
            const auto& shard = shards[static_cast<std::size_t>(participants[i])];
            steps += static_cast<long long>(cfg.local_epochs) *
                     detail::batches_per_epoch(shard.size(), cfg.batch_size);
        }
        axpy(1.0, aggregate(cfg.aggregation, updates), global);
    }
    return {std::move(global), 0, steps, 0};
}

inline UnlearnOutcome retrain_oracle(const HistoryArchive& archive, const Dataset& dataset,
                                     const Partition& part, const UnlearnRequest& request) {
    return retrain_oracle(archive, dataset, part, std::vector<UnlearnRequest>{request});
}

// The requester's replacement update for one replay round: short retraining
// on the remaining records, optional ascent steps on the forget payload,
// optional norm preservation against the stored update.
inline ParamVector calibrated_update(const ModelSpec& spec, const ParamVector& corrected_global,
                                     const Batch& remaining, const Batch& forget_payload,
                                     const FederationConfig& cfg, const CalibrationOptions& opt,
                                     int round, int client, const ParamVector& stored_update,
                                     long long& steps, int& zero_norm_skips) {
    const double lr = opt.calibration_lr >= 0.0 ? opt.calibration_lr : cfg.learning_rate;

    ParamVector local = corrected_global;
    if (!remaining.empty()) {
        const ParamVector delta =
            local_train(spec, corrected_global, remaining, opt.calibration_epochs, cfg.batch_size,
                        lr, cfg.momentum, client_round_seed(cfg.seed, round, client));
        axpy(1.0, delta, local);
        steps += static_cast<long long>(opt.calibration_epochs) *
                 detail::batches_per_epoch(remaining.size(), cfg.batch_size);
    }
    if (opt.unlearn_rate > 0.0 && !forget_payload.empty()) {
        for (int e = 0; e < opt.calibration_epochs; ++e) {
            const auto grad = loss_and_grad(spec, local, forget_payload).second;
            axpy(opt.unlearn_rate * lr, grad, local);
            ++steps;
        }
    }
    axpy(-1.0, corrected_global, local);  // local is now the raw update

    if (!opt.preserve_norm) return local;
    const double raw_norm = norm2(local);
    if (raw_norm == 0.0) {
        ++zero_norm_skips;
        return stored_update;
    }
    scale(local, norm2(stored_update) / raw_norm);
    return local;
}

// FedEraser-style unlearning: replay the archived rounds in order keeping a
// corrected global; wherever a requesting client participated its stored
// update is replaced by a calibration update recomputed from the corrected
// global, everyone else's stored updates are reused unchanged, and the
// round's aggregation rule is identical to training.
inline UnlearnOutcome federaser_unlearn(const HistoryArchive& archive, const Dataset& dataset,
                                        const Partition& part,
                                        const std::vector<UnlearnRequest>& requests,
                                        const CalibrationOptions& opt = {},
                                        const UpdateFilter& filter = {}) {
    require(opt.calibration_epochs >= 1, "federaser_unlearn: calibration_epochs must be >= 1");
    for (const auto& r : requests) r.validate();

    struct RequesterState {
        Batch remaining;
        Batch payload;
    };
    std::map<int, RequesterState> requesters;
    for (const auto& req : requests) {
        require(!requesters.count(req.client_id),
                "federaser_unlearn: duplicate request for one client");
        auto it = part.assignments.find(req.client_id);
        require(it != part.assignments.end(), "federaser_unlearn: unknown client in request");
        auto [kept, misses] = detail::remove_matches(dataset, it->second, req.forget_set);
        (void)misses;  // non-members simply are not removed; the payload is honored as sent
        RequesterState st;
        st.remaining.reserve(kept.size());
        for (auto i : kept) st.remaining.push_back(dataset.examples[i]);
        st.payload = req.forget_set;
        requesters[req.client_id] = std::move(st);
    }

    if (archive.records.empty())
        return {init_params(archive.model_spec, archive.config.seed), 0, 0, 0};

    const auto& cfg = archive.config;
    const auto& spec = archive.model_spec;
    ParamVector corrected = archive.records.front().global_before;
    long long steps = 0;
    int zero_norm_skips = 0;
    int calibration_rounds = 0;

    for (const auto& rec : archive.records) {
        std::vector<ParamVector> updates;
        updates.reserve(rec.participant_ids.size());
        bool calibrated_this_round = false;
        for (int client : rec.participant_ids) {
            const auto& stored = rec.client_updates.at(client);
            auto it = requesters.find(client);
            if (it == requesters.end()) {
                updates.push_back(stored);
                continue;
            }
            calibrated_this_round = true;
            updates.push_back(calibrated_update(spec, corrected, it->second.remaining,
                                                it->second.payload, cfg, opt, rec.round_index,
                                                client, stored, steps, zero_norm_skips));
        }
        if (calibrated_this_round) ++calibration_rounds;
        if (filter) filter(rec.round_index, rec.participant_ids, updates);
        axpy(1.0, aggregate(cfg.aggregation, updates), corrected);
    }
    require(corrected.all_finite(), "federaser_unlearn: non-finite unlearned global");
    return {std::move(corrected), calibration_rounds, steps, zero_norm_skips};
}

inline UnlearnOutcome federaser_unlearn(const HistoryArchive& archive, const Dataset& dataset,
                                        const Partition& part, const UnlearnRequest& request,
                                        int calibration_epochs = 1, double calibration_lr = -1.0) {
    CalibrationOptions opt;
    opt.calibration_epochs = calibration_epochs;
    opt.calibration_lr = calibration_lr;
    return federaser_unlearn(archive, dataset, part, std::vector<UnlearnRequest>{request}, opt);
}

// Dispatch helper used by the attack pipeline and the CLI.
inline UnlearnOutcome run_unlearning(UnlearnMode mode, const HistoryArchive& archive,
                                     const Dataset& dataset, const Partition& part,
                                     const std::vector<UnlearnRequest>& requests,
                                     const CalibrationOptions& opt = {},
                                     const UpdateFilter& filter = {}) {
    if (mode == UnlearnMode::retrain) return retrain_oracle(archive, dataset, part, requests);
    return federaser_unlearn(archive, dataset, part, requests, opt, filter);
}

}  // namespace fedmua
