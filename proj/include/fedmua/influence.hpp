#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/model.hpp"

namespace fedmua {

// The sample a malicious client wants misclassified. It belongs to some other
// client; the attacker only knows its features and current label.
struct TargetSpec {
    std::vector<double> features;
    int label = 0;
    int owner_client = -1;
};

// Influence of upweighting each attacker-shard example on the loss at the
// target: score = -grad_target^T (H + damping I)^{-1} grad_example, with the
// Hessian taken over the attacker's shard only (the attacker sees nothing
// else). Negative scores mark examples whose upweighting lowers the target's
// loss.
struct InfluenceReport {
    std::vector<double> scores;  // one per shard index
    int evaluated_on = -1;
    double damping = 0.01;
    int cg_iters = 0;
    bool converged = false;
};

inline InfluenceReport influence_scores(const ModelSpec& spec, const ParamVector& trained_params,
                                        const Batch& attacker_shard, const TargetSpec& target,
                                        double damping = 0.01, int cg_iters = 200,
                                        int evaluated_on = -1, double cg_tol = 1e-6) {
    require(!attacker_shard.empty(), "influence_scores: empty shard");
    const Batch target_batch{Example{target.features, target.label}};
    const auto target_grad = loss_and_grad(spec, trained_params, target_batch).second;
    const auto solve =
        inverse_hvp(spec, trained_params, attacker_shard, target_grad, damping, cg_iters, cg_tol);

    InfluenceReport report;
    report.evaluated_on = evaluated_on;
    report.damping = damping;
    report.cg_iters = solve.iterations;
    report.converged = solve.converged;
    report.scores.resize(attacker_shard.size());
    for (std::size_t i = 0; i < attacker_shard.size(); ++i) {
        const auto g = loss_and_grad(spec, trained_params, Batch{attacker_shard[i]}).second;
        report.scores[i] = -dot(solve.solution, g);
        require(std::isfinite(report.scores[i]), "influence_scores: non-finite score");
    }
    return report;
}

struct InfluenceSelection {
    std::vector<std::size_t> indices;  // shard indices, most negative first
    int chosen_label = 0;
    std::size_t shortfall = 0;  // how many short of p the same-label pick came up
};

// Selection rule: take the n most-negative scores (ties by lower index), pick
// the most frequent label among them (ties by smaller label), then keep up to
// p of that label in most-negative-first order.
inline InfluenceSelection select_influential(const InfluenceReport& report,
                                             const std::vector<int>& shard_labels, std::size_t n,
                                             std::size_t p) {
    require(shard_labels.size() == report.scores.size(),
            "select_influential: labels/scores size mismatch");
    require(n <= report.scores.size(), "select_influential: n exceeds shard size");
    require(p <= n, "select_influential: p exceeds n");

    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < report.scores.size(); ++i)
        if (report.scores[i] < 0.0) negatives.push_back(i);
    if (negatives.empty())
        throw empty_selection_error("select_influential: no negative influence scores");

    std::stable_sort(negatives.begin(), negatives.end(), [&](std::size_t a, std::size_t b) {
        if (report.scores[a] != report.scores[b]) return report.scores[a] < report.scores[b];
        return a < b;
    });
    if (negatives.size() > n) negatives.resize(n);

    std::map<int, std::size_t> label_counts;
    for (auto i : negatives) label_counts[shard_labels[i]]++;
    int chosen = negatives.empty() ? 0 : shard_labels[negatives.front()];
    std::size_t best_count = 0;
    for (const auto& [label, count] : label_counts)
        if (count > best_count) {  // map iteration is ascending, so ties keep the smaller label
            chosen = label;
            best_count = count;
        }

    InfluenceSelection sel;
    sel.chosen_label = chosen;
    for (auto i : negatives) {
        if (sel.indices.size() == p) break;
        if (shard_labels[i] == chosen) sel.indices.push_back(i);
    }
    sel.shortfall = p > sel.indices.size() ? p - sel.indices.size() : 0;
    return sel;
}

}  // namespace fedmua
