#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedmua/defense.hpp"
#include "fedmua/error.hpp"
#include "fedmua/influence.hpp"
#include "fedmua/partition.hpp"
#include "fedmua/rng.hpp"
#include "fedmua/unlearn.hpp"

namespace fedmua {

enum class SelectionMode { isi, random };

// Attack-side knobs. The attacker ids are the lowest num_attackers client
// ids; targets must belong to somebody else.
struct AttackConfig {
    std::size_t n = 0;           // candidate count (0: defaults to 4p, capped by shard size)
    std::size_t p = 0;           // selected count per attacker and target
    double epsilon_fraction = 1.0;
    SelectionMode mode = SelectionMode::isi;
    int num_attackers = 1;
    std::vector<TargetSpec> targets;

    // Influence solve parameters.
    double damping = 0.01;
    int cg_iters = 200;

    // The malicious client's submitted unlearning procedure (see
    // CalibrationOptions): ascent strength on the forget payload and whether
    // the recomputed update is sent unnormalized.
    double unlearn_rate = 8.0;
    bool raw_updates = true;
    int calibration_epochs = 1;

    void validate() const {
        require(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0,
                "AttackConfig: epsilon_fraction must be in (0,1]");
        require(num_attackers >= 1, "AttackConfig: need at least one attacker");
        for (const auto& t : targets)
            require(t.owner_client < 0 || t.owner_client >= num_attackers,
                    "AttackConfig: target owner collides with an attacker id");
    }
};

// One attacker's plan for one target: which shard samples were picked, the
// perturbations applied, and the residual distances to the target.
struct AttackPlan {
    int attacker_client = -1;
    std::size_t target_index = 0;
    std::vector<std::size_t> shard_indices;    // positions within the attacker shard
    std::vector<std::size_t> dataset_indices;  // the same samples as dataset indices
    int chosen_label = 0;
    std::vector<Example> crafted;              // x'_j, labels unchanged
    std::vector<std::vector<double>> deltas;   // delta_j = x_j - x'_j after clamping
    std::vector<double> zeta;                  // ||x'_j - x_t||
    double epsilon = 0.0;                      // max per-sample l2 budget actually allowed
    double epsilon_fraction = 1.0;
    std::size_t n_candidates = 0;
    std::size_t p_selected = 0;
    double alpha = 0.0;                        // p / attacker shard size
    std::size_t zero_direction_skips = 0;
    std::size_t selection_shortfall = 0;
};

struct CraftResult {
    std::vector<Example> crafted;
    std::vector<std::vector<double>> deltas;
    std::vector<double> zeta;
    std::size_t skipped = 0;  // samples coinciding with the target
    double epsilon = 0.0;
};

// MUG: move each selected sample straight toward the target by
// epsilon_fraction of its full distance, keep the label, clamp features back
// into [0,1], and account the budget from the clamped result.
inline CraftResult craft_malicious_samples(const std::vector<Example>& selected,
                                           const std::vector<double>& target_features,
                                           double epsilon_fraction) {
    require(epsilon_fraction > 0.0 && epsilon_fraction <= 1.0,
            "craft_malicious_samples: epsilon_fraction must be in (0,1]");
    CraftResult out;
    for (const auto& ex : selected) {
        require(ex.features.size() == target_features.size(),
                "craft_malicious_samples: dimension mismatch");
        double dist = 0.0;
        for (std::size_t j = 0; j < ex.features.size(); ++j) {
            const double d = ex.features[j] - target_features[j];
            dist += d * d;
        }
        dist = std::sqrt(dist);
        if (dist == 0.0) {
            ++out.skipped;
            continue;
        }
        out.epsilon = std::max(out.epsilon, epsilon_fraction * dist);

        Example crafted = ex;
        std::vector<double> delta(ex.features.size());
        double zeta = 0.0;
        for (std::size_t j = 0; j < ex.features.size(); ++j) {
            const double step = epsilon_fraction * (ex.features[j] - target_features[j]);
            double v = ex.features[j] - step;
            v = std::clamp(v, 0.0, 1.0);
            crafted.features[j] = v;
            delta[j] = ex.features[j] - v;
            const double r = v - target_features[j];
            zeta += r * r;
        }
        out.crafted.push_back(std::move(crafted));
        out.deltas.push_back(std::move(delta));
        out.zeta.push_back(std::sqrt(zeta));
    }
    return out;
}

struct AttackOutcome {
    ParamVector unlearned_global;
    std::vector<AttackPlan> plans;
    nlohmann::json audit;           // per attacker/target log entries
    Dataset registered_dataset;     // the dataset with x'_j written in place of x_j
    bool any_request = false;
};

// Algorithm flow per attacker and target: influence scores over the
// attacker's shard, candidate/same-label selection (or a seeded uniform draw
// of p samples in random mode), feature perturbation toward the target,
// registration of the perturbed samples in place of the originals, a forget
// request for exactly those samples, and the unlearning replay. Multiple
// targets contribute the union of their selections; multiple attackers each
// run on their own shard and their requests are unlearned together.
inline AttackOutcome execute_attack(const HistoryArchive& archive, const Dataset& dataset,
                                    const Partition& part, const AttackConfig& config,
                                    UnlearnMode fu_mode, const UpdateFilter& filter = {}) {
    config.validate();
    require(part.num_clients() > config.num_attackers,
            "execute_attack: attackers cannot be the whole federation");

    const ParamVector& global = archive.final_global();
    const auto& spec = archive.model_spec;

    AttackOutcome outcome;
    outcome.registered_dataset = dataset;
    outcome.audit = nlohmann::json::array();

    std::vector<UnlearnRequest> requests;
    for (int attacker = 0; attacker < config.num_attackers; ++attacker) {
        const auto& shard_indices = part.assignments.at(attacker);
        const Batch shard = shard_of(dataset, part, attacker);
        std::vector<int> shard_labels(shard.size());
        for (std::size_t i = 0; i < shard.size(); ++i) shard_labels[i] = shard[i].label;

        // Union of selections over targets; first target to pick a sample
        // keeps it.
        std::vector<char> taken(shard.size(), 0);
        Batch forget_payload;

        for (std::size_t t = 0; t < config.targets.size(); ++t) {
            const auto& target = config.targets[t];
            nlohmann::json entry{{"attacker", attacker},
                                 {"target", t},
                                 {"target_label", target.label},
                                 {"mode", config.mode == SelectionMode::isi ? "isi" : "random"}};

            AttackPlan plan;
            plan.attacker_client = attacker;
            plan.target_index = t;
            plan.epsilon_fraction = config.epsilon_fraction;

            std::vector<std::size_t> picked;
            const std::size_t p = std::min(config.p, shard.size());
            if (config.mode == SelectionMode::random) {
                std::vector<std::size_t> order(shard.size());
                std::iota(order.begin(), order.end(), 0);
                auto eng = make_engine(derive_seed(archive.config.seed, stream::attack_random,
                                                   static_cast<std::uint64_t>(attacker),
                                                   static_cast<std::uint64_t>(t)));
                std::shuffle(order.begin(), order.end(), eng);
                for (auto i : order) {
                    if (picked.size() == p) break;
                    picked.push_back(i);
                }
                plan.chosen_label = -1;  // random mode has no label rule
                plan.n_candidates = p;
            } else {
                const std::size_t n =
                    std::min(config.n ? config.n : std::max<std::size_t>(4 * p, 1), shard.size());
                try {
                    const auto report = influence_scores(spec, global, shard, target, config.damping,
                                                         config.cg_iters, attacker);
                    const auto sel = select_influential(report, shard_labels, n, p);
                    picked = sel.indices;
                    plan.chosen_label = sel.chosen_label;
                    plan.selection_shortfall = sel.shortfall;
                    plan.n_candidates = n;
                    entry["cg_converged"] = report.converged;
                    entry["chosen_label"] = sel.chosen_label;
                } catch (const empty_selection_error& e) {
                    entry["error"] = e.what();
                    outcome.audit.push_back(entry);
                    continue;  // this target is lost; keep attacking the others
                }
            }

            std::vector<Example> selected;
            std::vector<std::size_t> fresh;  // not claimed by an earlier target
            for (auto i : picked) {
                if (taken[i]) continue;
                fresh.push_back(i);
                selected.push_back(shard[i]);
            }
            auto craft = craft_malicious_samples(selected, target.features, config.epsilon_fraction);

            plan.p_selected = craft.crafted.size();
            plan.alpha = shard.empty() ? 0.0
                                       : static_cast<double>(plan.p_selected) /
                                             static_cast<double>(shard.size());
            plan.epsilon = craft.epsilon;
            plan.zero_direction_skips = craft.skipped;
            plan.zeta = craft.zeta;
            plan.deltas = craft.deltas;
            plan.crafted = craft.crafted;

            // Register x'_j in place of x_j and queue it for forgetting.
            std::size_t out_pos = 0;
            for (std::size_t k = 0; k < fresh.size(); ++k) {
                const std::size_t i = fresh[k];
                double dist = 0.0;
                for (std::size_t j = 0; j < shard[i].features.size(); ++j) {
                    const double d = shard[i].features[j] - target.features[j];
                    dist += d * d;
                }
                if (dist == 0.0) continue;  // skipped by crafting
                taken[i] = 1;
                plan.shard_indices.push_back(i);
                plan.dataset_indices.push_back(shard_indices[i]);
                outcome.registered_dataset.examples[shard_indices[i]] = craft.crafted[out_pos];
                forget_payload.push_back(craft.crafted[out_pos]);
                ++out_pos;
            }

            entry["selected"] = plan.p_selected;
            entry["shortfall"] = plan.selection_shortfall;
            entry["zero_direction_skips"] = plan.zero_direction_skips;
            entry["epsilon"] = plan.epsilon;
            outcome.audit.push_back(entry);
            outcome.plans.push_back(std::move(plan));
        }

        if (!forget_payload.empty()) {
            UnlearnRequest req;
            req.client_id = attacker;
            req.forget_set = std::move(forget_payload);
            req.mode = fu_mode;
            requests.push_back(std::move(req));
        }
    }

    if (requests.empty()) {
        // Nothing to unlearn: the replay is a no-op and reproduces training.
        UnlearnOutcome noop = federaser_unlearn(archive, dataset, part, {}, {}, filter);
        outcome.unlearned_global = std::move(noop.unlearned_global);
        outcome.any_request = false;
        return outcome;
    }

    CalibrationOptions opt;
    opt.calibration_epochs = config.calibration_epochs;
    opt.preserve_norm = !config.raw_updates;
    opt.unlearn_rate = config.unlearn_rate;
    auto result = run_unlearning(fu_mode, archive, outcome.registered_dataset, part, requests, opt, filter);
    outcome.unlearned_global = std::move(result.unlearned_global);
    outcome.any_request = true;
    outcome.audit.push_back({{"calibration_rounds_used", result.calibration_rounds_used},
                             {"wall_steps", result.wall_steps},
                             {"zero_norm_skips", result.zero_norm_skips}});
    return outcome;
}

}  // namespace fedmua
