#pragma once

#include <string>
#include <vector>

#include "fedmua/dataset.hpp"
#include "fedmua/error.hpp"
#include "fedmua/influence.hpp"
#include "fedmua/model.hpp"

namespace fedmua {

struct TargetOutcome {
    std::size_t test_index = 0;
    int true_label = 0;
    int pre_label = 0;           // prediction of the trained global model
    int post_label = 0;          // prediction of the maliciously unlearned model
    bool success = false;        // post_label != true_label
    bool benign_success = false; // same flip under the benign unlearning run
};

struct MetricsBundle {
    double asr = 0.0;
    double asr_b = 0.0;
    double acc_g = 0.0;
    double acc_g_unlearned = 0.0;
    std::vector<TargetOutcome> per_target;
    std::uint64_t seed = 0;
    std::string config_digest;
};

// Fraction of targets the per-target unlearned models misclassify.
inline double compute_asr(const ModelSpec& spec, const std::vector<ParamVector>& unlearned_per_target,
                          const std::vector<TargetSpec>& targets) {
    require(!targets.empty(), "compute_asr: no targets");
    require(unlearned_per_target.size() == targets.size(),
            "compute_asr: params/targets size mismatch");
    std::size_t flips = 0;
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (predict(spec, unlearned_per_target[i], targets[i].features) != targets[i].label) ++flips;
    return static_cast<double>(flips) / static_cast<double>(targets.size());
}

inline double compute_accuracy(const ModelSpec& spec, const ParamVector& params,
                               const Dataset& test) {
    require(!test.examples.empty(), "compute_accuracy: empty test set");
    std::size_t correct = 0;
    for (const auto& ex : test.examples)
        if (predict(spec, params, ex.features) == ex.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedmua
