#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fedmua/dataset.hpp"
#include "fedmua/error.hpp"
#include "fedmua/rng.hpp"

namespace fedmua {

struct PartitionScheme {
    enum class Kind { iid, dirichlet };
    Kind kind = Kind::iid;
    double beta = 0.5;  // Dirichlet concentration, ignored for iid

    static PartitionScheme iid() { return {Kind::iid, 0.0}; }
    static PartitionScheme dirichlet(double beta) { return {Kind::dirichlet, beta}; }

    std::string describe() const {
        return kind == Kind::iid ? "iid" : "dirichlet(" + std::to_string(beta) + ")";
    }
};

// Client-id -> sorted example indices. Disjoint, covering, every client
// nonempty.
struct Partition {
    std::map<int, std::vector<std::size_t>> assignments;
    PartitionScheme scheme;

    int num_clients() const { return static_cast<int>(assignments.size()); }

    void validate(std::size_t dataset_size) const {
        std::vector<char> seen(dataset_size, 0);
        std::size_t total = 0;
        for (const auto& [client, idxs] : assignments) {
            require(!idxs.empty(), "Partition: client " + std::to_string(client) + " is empty");
            require(std::is_sorted(idxs.begin(), idxs.end()), "Partition: indices not sorted");
            for (auto i : idxs) {
                require(i < dataset_size, "Partition: index out of range");
                require(!seen[i], "Partition: index assigned twice");
                seen[i] = 1;
                ++total;
            }
        }
        require(total == dataset_size, "Partition: assignments do not cover the dataset");
    }
};

namespace detail {

// Largest-remainder apportionment of n items to the given nonnegative shares.
inline std::vector<std::size_t> apportion(const std::vector<double>& shares, std::size_t n) {
    const std::size_t k = shares.size();
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double quota = shares[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(quota);
        remainders[i] = {quota - static_cast<double>(counts[i]), i};
        assigned += counts[i];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < n; ++j, ++assigned) counts[remainders[j % k].second]++;
    return counts;
}

}  // namespace detail

// Splits a dataset's indices over num_clients clients.
//
// iid: indices shuffled once by the seeded engine and dealt round-robin.
// dirichlet(beta): per class (ascending label), class indices are shuffled,
// client shares are drawn as normalized Gamma(beta, 1) variates from the same
// engine, and indices are handed out contiguously per client in client order
// using largest-remainder apportionment. If any client ends up empty the
// shares for all classes are redrawn, up to 100 attempts, after which one
// example is moved from the largest client to each empty one.
inline Partition partition(const Dataset& dataset, int num_clients, const PartitionScheme& scheme,
                           std::uint64_t seed) {
    if (num_clients < 2) throw partition_error("partition: need at least 2 clients");
    if (dataset.size() < static_cast<std::size_t>(num_clients))
        throw partition_error("partition: fewer examples than clients");

    auto eng = make_engine(derive_seed(seed, stream::partition));
    Partition part;
    part.scheme = scheme;
    for (int c = 0; c < num_clients; ++c) part.assignments[c] = {};

    if (scheme.kind == PartitionScheme::Kind::iid) {
        std::vector<std::size_t> class_counts(static_cast<std::size_t>(dataset.class_count), 0);
        for (const auto& ex : dataset.examples) class_counts[static_cast<std::size_t>(ex.label)]++;
        for (auto c : class_counts)
            if (c < static_cast<std::size_t>(num_clients))
                throw partition_error("partition: iid needs >= num_clients examples of each class");

        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), eng);
        for (std::size_t i = 0; i < order.size(); ++i)
            part.assignments[static_cast<int>(i % static_cast<std::size_t>(num_clients))].push_back(
                order[i]);
    } else {
        if (scheme.beta <= 0.0) throw partition_error("partition: dirichlet beta must be positive");

        std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.class_count));
        for (std::size_t i = 0; i < dataset.size(); ++i)
            by_class[static_cast<std::size_t>(dataset.examples[i].label)].push_back(i);
        for (auto& idxs : by_class) std::shuffle(idxs.begin(), idxs.end(), eng);

        std::gamma_distribution<double> gamma(scheme.beta, 1.0);
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            for (auto& [_, idxs] : part.assignments) idxs.clear();
            for (const auto& cls : by_class) {
                std::vector<double> shares(static_cast<std::size_t>(num_clients));
                double total = 0.0;
                for (auto& s : shares) {
                    s = gamma(eng);
                    total += s;
                }
                for (auto& s : shares) s = total > 0.0 ? s / total : 1.0 / num_clients;
                const auto counts = detail::apportion(shares, cls.size());
                std::size_t off = 0;
                for (int c = 0; c < num_clients; ++c) {
                    auto& dst = part.assignments[c];
                    dst.insert(dst.end(), cls.begin() + static_cast<std::ptrdiff_t>(off),
                               cls.begin() + static_cast<std::ptrdiff_t>(off + counts[static_cast<std::size_t>(c)]));
                    off += counts[static_cast<std::size_t>(c)];
                }
            }
            ok = true;
            for (const auto& [_, idxs] : part.assignments)
                if (idxs.empty()) ok = false;
        }
        if (!ok) {
            for (auto& [client, idxs] : part.assignments) {
                if (!idxs.empty()) continue;
                auto largest = std::max_element(
                    part.assignments.begin(), part.assignments.end(),
                    [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });
                if (largest->second.size() <= 1)
                    throw partition_error("partition: cannot satisfy nonempty-client constraint");
                idxs.push_back(largest->second.back());
                largest->second.pop_back();
            }
        }
    }

    for (auto& [_, idxs] : part.assignments) std::sort(idxs.begin(), idxs.end());
    part.validate(dataset.size());
    return part;
}

// Materializes a client's shard in index order.
inline Batch shard_of(const Dataset& dataset, const Partition& part, int client) {
    auto it = part.assignments.find(client);
    require(it != part.assignments.end(), "shard_of: unknown client");
    Batch out;
    out.reserve(it->second.size());
    for (auto i : it->second) out.push_back(dataset.examples[i]);
    return out;
}

}  // namespace fedmua
