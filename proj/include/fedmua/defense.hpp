#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/federation.hpp"
#include "fedmua/param_vector.hpp"

namespace fedmua {

// Round-level screen on client update magnitudes: norms past an IQR fence
// are treated as suspicious and the matching updates get scaled by lambda.
struct DefenseConfig {
    enum class Fence { upper_quartile, tukey };
    double lambda = 0.1;         // scale applied to flagged updates
    Fence fence = Fence::tukey;
    double tukey_k = 1.5;
    int first_round = 0;                                   // active range, inclusive
    int last_round = std::numeric_limits<int>::max();

    void validate() const {
        require(lambda > 0.0 && lambda <= 1.0, "DefenseConfig: lambda must be in (0,1]");
        require(tukey_k >= 0.0, "DefenseConfig: tukey k must be nonnegative");
    }

    bool active_in(int round) const { return round >= first_round && round <= last_round; }

    std::string describe_fence() const {
        return fence == Fence::upper_quartile ? "upper_quartile"
                                              : "tukey(" + std::to_string(tukey_k) + ")";
    }
};

struct DefenseReport {
    std::map<int, std::vector<int>> flags;                   // round -> flagged clients
    std::map<int, std::map<int, double>> norms;              // round -> client -> norm seen
    double lambda = 1.0;
    std::string fence;
};

// Sum of per-layer l2 norms of an update.
inline double gradient_norm(const ParamVector& update, const Manifest& manifest) {
    require(update.manifest == manifest, "gradient_norm: manifest mismatch");
    return layer_norm_sum(update);
}

// Linear-interpolation quantile over already sorted values (the numpy
// default): position q*(n-1), interpolated between neighbors.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    require(!sorted.empty(), "sorted_quantile: empty input");
    if (sorted.size() == 1) return sorted[0];
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Clients whose norms exceed the fence. With fewer than four norms nothing
// is flagged; comparisons are strict, so identical norms never flag.
inline std::set<int> flag_outliers(const std::map<int, double>& norms, const DefenseConfig& cfg) {
    std::set<int> flagged;
    if (norms.size() < 4) return flagged;
    std::vector<double> sorted;
    sorted.reserve(norms.size());
    for (const auto& [_, v] : norms) sorted.push_back(v);
    std::sort(sorted.begin(), sorted.end());
    const double q1 = sorted_quantile(sorted, 0.25);
    const double q3 = sorted_quantile(sorted, 0.75);
    const double fence =
        cfg.fence == DefenseConfig::Fence::upper_quartile ? q3 : q3 + cfg.tukey_k * (q3 - q1);
    for (const auto& [client, v] : norms)
        if (v > fence) flagged.insert(client);
    return flagged;
}

// Scales flagged clients' updates by lambda in place and returns the flags.
inline std::set<int> defend_round(std::vector<ParamVector>& updates,
                                  const std::vector<int>& participants, const DefenseConfig& cfg) {
    cfg.validate();
    require(updates.size() == participants.size(), "defend_round: updates/participants mismatch");
    std::map<int, double> norms;
    for (std::size_t i = 0; i < updates.size(); ++i)
        norms[participants[i]] = layer_norm_sum(updates[i]);
    auto flagged = flag_outliers(norms, cfg);
    for (std::size_t i = 0; i < updates.size(); ++i)
        if (flagged.count(participants[i])) scale(updates[i], cfg.lambda);
    return flagged;
}

// Adapts the defense into the pre-aggregation hook used by run_federation and
// the unlearning replay. The report records observed norms and flags per round.
inline UpdateFilter make_defense_filter(const DefenseConfig& cfg, DefenseReport* report) {
    DefenseConfig config = cfg;
    config.validate();
    if (report) {
        report->lambda = config.lambda;
        report->fence = config.describe_fence();
    }
    return [config, report](int round, const std::vector<int>& participants,
                            std::vector<ParamVector>& updates) {
        if (!config.active_in(round)) return;
        std::map<int, double> norms;
        for (std::size_t i = 0; i < updates.size(); ++i)
            norms[participants[i]] = layer_norm_sum(updates[i]);
        auto flagged = flag_outliers(norms, config);
        for (std::size_t i = 0; i < updates.size(); ++i)
            if (flagged.count(participants[i])) scale(updates[i], config.lambda);
        if (report) {
            report->norms[round] = std::move(norms);
            report->flags[round] = std::vector<int>(flagged.begin(), flagged.end());
        }
    };
}

}  // namespace fedmua
