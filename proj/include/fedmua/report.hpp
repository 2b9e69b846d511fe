#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fedmua/experiment.hpp"

namespace fedmua {

struct SummaryRow {
    std::string fu_mode, aggregation, dataset, selection;
    double epsilon_fraction = 1.0;
    double ratio = 0.0;  // requested samples / total training size
    int repetitions = 0;
    double asr_b_mean = 0, asr_b_std = 0;
    double asr_mean = 0, asr_std = 0;
    double acc_g_mean = 0, acc_g_std = 0;
    double acc_gu_mean = 0, acc_gu_std = 0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / (n - 1.0))};  // sample std
}

}  // namespace detail

// Aggregates the bundles found in an experiment output directory into one
// summary row per configuration. Every number is recomputed from the
// persisted bundle files; nothing is cached elsewhere.
inline std::vector<SummaryRow> summarize_output(const std::string& output_dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(output_dir + "/config.json"))
        throw report_error("no config.json under " + output_dir + "; run an experiment first");
    const json cfg = read_json_file(output_dir + "/config.json");

    std::vector<MetricsBundle> bundles;
    for (int i = 0;; ++i) {
        const std::string p = output_dir + "/rep_" + std::to_string(i) + "/bundle.json";
        if (!fs::exists(p)) break;
        bundles.push_back(read_json_file(p).get<MetricsBundle>());
    }
    if (bundles.empty()) throw report_error("no completed repetitions under " + output_dir);

    SummaryRow row;
    row.fu_mode = cfg.at("fu_mode").get<std::string>();
    row.aggregation = cfg.at("federation").at("aggregation").at("rule").get<std::string>();
    row.dataset = cfg.at("data").at("kind").get<std::string>();
    row.selection = cfg.at("attack").at("mode").get<std::string>();
    row.epsilon_fraction = cfg.at("attack").at("epsilon_fraction").get<double>();
    const double p_sel = cfg.at("attack").at("p").get<double>();
    const double attackers = cfg.at("attack").at("num_attackers").get<double>();
    const double train_count = cfg.at("data").at("train_count").get<double>();
    row.ratio = train_count > 0 ? p_sel * attackers / train_count : 0.0;
    row.repetitions = static_cast<int>(bundles.size());

    std::vector<double> asr, asr_b, acc_g, acc_gu;
    for (const auto& b : bundles) {
        asr.push_back(b.asr);
        asr_b.push_back(b.asr_b);
        acc_g.push_back(b.acc_g);
        acc_gu.push_back(b.acc_g_unlearned);
    }
    std::tie(row.asr_b_mean, row.asr_b_std) = detail::mean_std(asr_b);
    std::tie(row.asr_mean, row.asr_std) = detail::mean_std(asr);
    std::tie(row.acc_g_mean, row.acc_g_std) = detail::mean_std(acc_g);
    std::tie(row.acc_gu_mean, row.acc_gu_std) = detail::mean_std(acc_gu);
    return {row};
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw report_error("cannot write " + path);
    out << "fu_mode,aggregation,dataset,selection,epsilon_fraction,ratio,repetitions,"
           "asr_b_mean,asr_b_std,asr_mean,asr_std,acc_g_mean,acc_g_std,"
           "acc_g_unlearned_mean,acc_g_unlearned_std\n";
    out.precision(12);
    for (const auto& r : rows)
        out << r.fu_mode << "," << r.aggregation << "," << r.dataset << "," << r.selection << ","
            << r.epsilon_fraction << "," << r.ratio << "," << r.repetitions << "," << r.asr_b_mean
            << "," << r.asr_b_std << "," << r.asr_mean << "," << r.asr_std << "," << r.acc_g_mean
            << "," << r.acc_g_std << "," << r.acc_gu_mean << "," << r.acc_gu_std << "\n";
}

// Multi-directory report: one row per completed experiment directory.
inline std::vector<SummaryRow> summarize_many(const std::vector<std::string>& dirs) {
    std::vector<SummaryRow> rows;
    for (const auto& d : dirs)
        for (auto& r : summarize_output(d)) rows.push_back(std::move(r));
    if (rows.empty()) throw report_error("nothing to report");
    return rows;
}

}  // namespace fedmua
