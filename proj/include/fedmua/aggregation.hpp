#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/param_vector.hpp"

namespace fedmua {

struct AggregationRule {
    enum class Kind { fedavg, median, trimmed_mean, krum };
    Kind kind = Kind::fedavg;
    int k = 0;  // trimmed_mean: values trimmed per side; krum: assumed malicious count

    static AggregationRule fedavg() { return {Kind::fedavg, 0}; }
    static AggregationRule median() { return {Kind::median, 0}; }
    static AggregationRule trimmed_mean(int k) { return {Kind::trimmed_mean, k}; }
    static AggregationRule krum(int m) { return {Kind::krum, m}; }

    std::string describe() const {
        switch (kind) {
            case Kind::fedavg: return "fedavg";
            case Kind::median: return "median";
            case Kind::trimmed_mean: return "trimmed_mean(" + std::to_string(k) + ")";
            case Kind::krum: return "krum(" + std::to_string(k) + ")";
        }
        return "?";
    }
};

// Index of the update Krum selects: the one minimizing the sum of squared
// distances to its n-m-2 nearest other updates, ties broken by lowest index.
inline std::size_t krum_select(const std::vector<ParamVector>& updates, int m) {
    const std::size_t n = updates.size();
    if (static_cast<int>(n) - m - 2 < 1)
        throw aggregation_error("krum: need clients - m - 2 >= 1");
    const std::size_t neighbors = n - static_cast<std::size_t>(m) - 2;

    std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < updates[i].size(); ++t) {
                const double diff = updates[i].values[t] - updates[j].values[t];
                s += diff * diff;
            }
            d2[i][j] = d2[j][i] = s;
        }

    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(d2[i][j]);
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (std::size_t t = 0; t < neighbors; ++t) score += others[t];
        if (i == 0 || score < best_score) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

// Combines equal-manifest updates under the chosen rule.
inline ParamVector aggregate(const AggregationRule& rule, const std::vector<ParamVector>& updates) {
    if (updates.empty()) throw aggregation_error("aggregate: no updates");
    for (const auto& u : updates)
        if (!u.same_manifest(updates.front()))
            throw aggregation_error("aggregate: manifest mismatch across updates");

    const std::size_t n = updates.size();
    const std::size_t dim = updates.front().size();

    switch (rule.kind) {
        case AggregationRule::Kind::fedavg: {
            ParamVector out = ParamVector::zeros_like(updates.front());
            for (const auto& u : updates) axpy(1.0, u, out);
            for (auto& v : out.values) v /= static_cast<double>(n);
            return out;
        }
        case AggregationRule::Kind::median: {
            ParamVector out = ParamVector::zeros_like(updates.front());
            std::vector<double> column(n);
            for (std::size_t t = 0; t < dim; ++t) {
                for (std::size_t i = 0; i < n; ++i) column[i] = updates[i].values[t];
                std::sort(column.begin(), column.end());
                out.values[t] = (n % 2 == 1) ? column[n / 2]
                                             : 0.5 * (column[n / 2 - 1] + column[n / 2]);
            }
            return out;
        }
        case AggregationRule::Kind::trimmed_mean: {
            const int k = rule.k;
            if (k < 0 || 2 * static_cast<std::size_t>(k) >= n)
                throw aggregation_error("trimmed_mean: need 2k < number of updates");
            ParamVector out = ParamVector::zeros_like(updates.front());
            std::vector<double> column(n);
            for (std::size_t t = 0; t < dim; ++t) {
                for (std::size_t i = 0; i < n; ++i) column[i] = updates[i].values[t];
                std::sort(column.begin(), column.end());
                double s = 0.0;
                for (std::size_t i = static_cast<std::size_t>(k); i < n - static_cast<std::size_t>(k); ++i)
                    s += column[i];
                out.values[t] = s / static_cast<double>(n - 2 * static_cast<std::size_t>(k));
            }
            return out;
        }
        case AggregationRule::Kind::krum:
            return updates[krum_select(updates, rule.k)];
    }
    throw aggregation_error("aggregate: unknown rule");
}

}  // namespace fedmua
