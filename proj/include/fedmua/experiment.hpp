#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedmua/archive.hpp"
#include "fedmua/attack.hpp"
#include "fedmua/defense.hpp"
#include "fedmua/metrics.hpp"
#include "fedmua/serialize.hpp"
#include "fedmua/threading.hpp"

namespace fedmua {

// Where the examples come from. Synthetic kinds draw train and test from one
// generator stream so both halves share a distribution.
struct DataSourceConfig {
    std::string kind = "digits";  // blobs | digits | purchase | idx | csv
    std::size_t train_count = 2000;
    std::size_t test_count = 1000;

    // synthetic knobs
    std::size_t dim = 784;
    int classes = 10;
    double noise = 0.25;
    double separation = 2.0;

    // idx / csv sources
    std::string images_path, labels_path, test_images_path, test_labels_path;
    std::string csv_path, label_column = "label";
    std::vector<std::string> categorical_columns;
};

struct DefensePhases {
    bool during_training = false;
    bool during_unlearning = true;
};

struct ExperimentConfig {
    DataSourceConfig data;
    ModelSpec model;
    FederationConfig federation;
    PartitionScheme scheme = PartitionScheme::iid();
    AttackConfig attack;  // targets are sampled per run; leave empty here
    std::size_t num_targets = 20;
    UnlearnMode fu_mode = UnlearnMode::federaser;
    bool defense_enabled = false;
    DefenseConfig defense;
    DefensePhases defense_phases;
    int repetitions = 1;
    std::string output_dir = "out";
    bool benign_baseline = true;

    // FEDMUA_SEED in the environment overrides the federation seed.
    void apply_env_seed() {
        if (const char* env = std::getenv("FEDMUA_SEED")) federation.seed = std::strtoull(env, nullptr, 10);
    }
};

inline void to_json(json& j, const DataSourceConfig& d) {
    j = json{{"kind", d.kind},           {"train_count", d.train_count},
             {"test_count", d.test_count}, {"dim", d.dim},
             {"classes", d.classes},     {"noise", d.noise},
             {"separation", d.separation}, {"images_path", d.images_path},
             {"labels_path", d.labels_path}, {"test_images_path", d.test_images_path},
             {"test_labels_path", d.test_labels_path}, {"csv_path", d.csv_path},
             {"label_column", d.label_column}, {"categorical_columns", d.categorical_columns}};
}

inline void from_json(const json& j, DataSourceConfig& d) {
    d.kind = j.value("kind", "digits");
    d.train_count = j.value("train_count", std::size_t{2000});
    d.test_count = j.value("test_count", std::size_t{1000});
    d.dim = j.value("dim", std::size_t{784});
    d.classes = j.value("classes", 10);
    d.noise = j.value("noise", 0.25);
    d.separation = j.value("separation", 2.0);
    d.images_path = j.value("images_path", "");
    d.labels_path = j.value("labels_path", "");
    d.test_images_path = j.value("test_images_path", "");
    d.test_labels_path = j.value("test_labels_path", "");
    d.csv_path = j.value("csv_path", "");
    d.label_column = j.value("label_column", "label");
    d.categorical_columns = j.value("categorical_columns", std::vector<std::string>{});
}

inline void to_json(json& j, const AttackConfig& a) {
    j = json{{"n", a.n},
             {"p", a.p},
             {"epsilon_fraction", a.epsilon_fraction},
             {"mode", a.mode == SelectionMode::isi ? "isi" : "random"},
             {"num_attackers", a.num_attackers},
             {"damping", a.damping},
             {"cg_iters", a.cg_iters},
             {"unlearn_rate", a.unlearn_rate},
             {"raw_updates", a.raw_updates},
             {"calibration_epochs", a.calibration_epochs}};
}

inline void from_json(const json& j, AttackConfig& a) {
    a.n = j.value("n", std::size_t{0});
    a.p = j.value("p", std::size_t{0});
    a.epsilon_fraction = j.value("epsilon_fraction", 1.0);
    a.mode = j.value("mode", std::string("isi")) == "random" ? SelectionMode::random : SelectionMode::isi;
    a.num_attackers = j.value("num_attackers", 1);
    a.damping = j.value("damping", 0.01);
    a.cg_iters = j.value("cg_iters", 200);
    a.unlearn_rate = j.value("unlearn_rate", 8.0);
    a.raw_updates = j.value("raw_updates", true);
    a.calibration_epochs = j.value("calibration_epochs", 1);
}

inline void to_json(json& j, const DefenseConfig& d) {
    j = json{{"lambda", d.lambda},
             {"fence", d.fence == DefenseConfig::Fence::upper_quartile ? "upper_quartile" : "tukey"},
             {"tukey_k", d.tukey_k},
             {"first_round", d.first_round},
             {"last_round", d.last_round}};
}

inline void from_json(const json& j, DefenseConfig& d) {
    d.lambda = j.value("lambda", 0.1);
    d.fence = j.value("fence", std::string("tukey")) == "upper_quartile"
                  ? DefenseConfig::Fence::upper_quartile
                  : DefenseConfig::Fence::tukey;
    d.tukey_k = j.value("tukey_k", 1.5);
    d.first_round = j.value("first_round", 0);
    d.last_round = j.value("last_round", std::numeric_limits<int>::max());
}

inline void to_json(json& j, const TargetOutcome& t) {
    j = json{{"test_index", t.test_index},   {"true_label", t.true_label},
             {"pre_label", t.pre_label},     {"post_label", t.post_label},
             {"success", t.success},         {"benign_success", t.benign_success}};
}

inline void from_json(const json& j, TargetOutcome& t) {
    t.test_index = j.at("test_index").get<std::size_t>();
    t.true_label = j.at("true_label").get<int>();
    t.pre_label = j.at("pre_label").get<int>();
    t.post_label = j.at("post_label").get<int>();
    t.success = j.at("success").get<bool>();
    t.benign_success = j.at("benign_success").get<bool>();
}

inline void to_json(json& j, const MetricsBundle& m) {
    j = json{{"asr", m.asr},
             {"asr_b", m.asr_b},
             {"acc_g", m.acc_g},
             {"acc_g_unlearned", m.acc_g_unlearned},
             {"per_target", m.per_target},
             {"seed", m.seed},
             {"config_digest", m.config_digest}};
}

inline void from_json(const json& j, MetricsBundle& m) {
    m.asr = j.at("asr").get<double>();
    m.asr_b = j.at("asr_b").get<double>();
    m.acc_g = j.at("acc_g").get<double>();
    m.acc_g_unlearned = j.at("acc_g_unlearned").get<double>();
    m.per_target = j.at("per_target").get<std::vector<TargetOutcome>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_digest = j.at("config_digest").get<std::string>();
}

// Canonical serialization of everything that affects results; the digest is
// FNV-1a over that string, so it changes exactly when a semantic field does.
inline json semantic_config_json(const ExperimentConfig& cfg) {
    json j;
    j["data"] = cfg.data;
    j["model"] = cfg.model;
    j["federation"] = cfg.federation;
    j["scheme"] = cfg.scheme.describe();
    j["attack"] = cfg.attack;
    j["num_targets"] = cfg.num_targets;
    j["fu_mode"] = cfg.fu_mode == UnlearnMode::federaser ? "federaser" : "retrain";
    j["defense_enabled"] = cfg.defense_enabled;
    if (cfg.defense_enabled) {
        j["defense"] = cfg.defense;
        j["defense_phases"] = {{"training", cfg.defense_phases.during_training},
                               {"unlearning", cfg.defense_phases.during_unlearning}};
    }
    j["repetitions"] = cfg.repetitions;
    j["benign_baseline"] = cfg.benign_baseline;
    return j;
}

inline std::string config_digest(const ExperimentConfig& cfg) {
    const std::string dump = semantic_config_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::pair<Dataset, Dataset> make_datasets(const DataSourceConfig& d, std::uint64_t seed) {
    auto split_tail = [&](Dataset all) {
        require(all.size() > d.test_count, "data source: not enough examples for the test split");
        Dataset test = all;
        test.examples.assign(all.examples.end() - static_cast<std::ptrdiff_t>(d.test_count),
                             all.examples.end());
        all.examples.resize(all.size() - d.test_count);
        return std::make_pair(std::move(all), std::move(test));
    };

    if (d.kind == "blobs")
        return split_tail(make_blobs(d.train_count + d.test_count, d.dim, d.separation, seed));
    if (d.kind == "digits")
        return split_tail(make_digits(d.train_count + d.test_count, seed, d.dim, d.classes, d.noise));
    if (d.kind == "purchase")
        return split_tail(make_purchase_like(d.train_count + d.test_count, seed, d.dim));
    if (d.kind == "idx") {
        Dataset train = load_idx(d.images_path, d.labels_path);
        Dataset test = load_idx(d.test_images_path, d.test_labels_path);
        auto subsample = [&](Dataset& ds, std::size_t count, std::uint64_t tag) {
            if (count == 0 || count >= ds.size()) return;
            std::vector<std::size_t> order(ds.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), make_engine(derive_seed(seed, stream::synthetic, tag)));
            order.resize(count);
            std::sort(order.begin(), order.end());
            std::vector<Example> kept;
            kept.reserve(count);
            for (auto i : order) kept.push_back(std::move(ds.examples[i]));
            ds.examples = std::move(kept);
        };
        subsample(train, d.train_count, 11);
        subsample(test, d.test_count, 12);
        return {std::move(train), std::move(test)};
    }
    if (d.kind == "csv") {
        CsvSchema schema;
        schema.categorical_columns = d.categorical_columns;
        Dataset all = load_csv(d.csv_path, d.label_column, schema);
        std::shuffle(all.examples.begin(), all.examples.end(),
                     make_engine(derive_seed(seed, stream::synthetic, 13)));
        return split_tail(std::move(all));
    }
    throw contract_error("unknown data source kind: " + d.kind);
}

// Targets are drawn from test examples the trained global model classifies
// correctly, so the success rate measures flips the attack caused rather
// than pre-existing errors. Owners rotate over the non-attacker clients.
inline std::vector<std::pair<std::size_t, TargetSpec>> sample_targets(
    const ExperimentConfig& cfg, const Dataset& test, const ParamVector& global,
    std::uint64_t seed) {
    std::vector<std::size_t> correct;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (predict(cfg.model, global, test.examples[i].features) == test.examples[i].label)
            correct.push_back(i);
    require(!correct.empty(), "sample_targets: the model classifies nothing correctly");
    std::shuffle(correct.begin(), correct.end(), make_engine(derive_seed(seed, stream::targets)));
    const std::size_t want = std::min(cfg.num_targets, correct.size());

    std::vector<std::pair<std::size_t, TargetSpec>> targets;
    const int owners = cfg.federation.num_clients - cfg.attack.num_attackers;
    for (std::size_t i = 0; i < want; ++i) {
        TargetSpec t;
        t.features = test.examples[correct[i]].features;
        t.label = test.examples[correct[i]].label;
        t.owner_client = cfg.attack.num_attackers + static_cast<int>(i % static_cast<std::size_t>(owners));
        targets.emplace_back(correct[i], std::move(t));
    }
    return targets;
}

struct ExperimentRun {
    MetricsBundle bundle;
    HistoryArchive archive;
    Partition partition;
    std::vector<AttackPlan> plans;
    json audit;
    DefenseReport train_defense, unlearn_defense;
};

// The full pipeline for one seed: train, per-target attack plus benign
// baseline, metrics. Per-target episodes are independent and run in parallel.
inline ExperimentRun run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentConfig local = cfg;
    local.federation.seed = seed;
    local.attack.validate();
    local.federation.validate();

    auto [train, test] = make_datasets(local.data, seed);
    require(local.model.input_dim == train.feature_dim && local.model.class_count == train.class_count,
            "run_single: model spec does not match the dataset");

    ExperimentRun run;
    run.partition = partition(train, local.federation.num_clients, local.scheme, seed);

    UpdateFilter train_filter;
    if (local.defense_enabled && local.defense_phases.during_training)
        train_filter = make_defense_filter(local.defense, &run.train_defense);
    auto [global, archive] = run_federation(local.federation, local.model, train, run.partition, train_filter);
    run.archive = std::move(archive);

    MetricsBundle bundle;
    bundle.seed = seed;
    bundle.config_digest = config_digest(cfg);
    bundle.acc_g = compute_accuracy(local.model, global, test);

    const auto targets = sample_targets(local, test, global, seed);
    if (targets.empty()) {
        run.bundle = std::move(bundle);
        return run;
    }

    struct Episode {
        TargetOutcome outcome;
        double unlearned_acc = 0.0;
        std::vector<AttackPlan> plans;
        json audit;
        DefenseReport defense;
    };
    std::vector<Episode> episodes(targets.size());

    parallel_for(targets.size(), [&](std::size_t i) {
        auto& ep = episodes[i];
        const auto& [test_index, target] = targets[i];
        ep.outcome.test_index = test_index;
        ep.outcome.true_label = target.label;
        ep.outcome.pre_label = predict(local.model, global, target.features);

        AttackConfig atk = local.attack;
        atk.targets = {target};

        UpdateFilter unlearn_filter;
        if (local.defense_enabled && local.defense_phases.during_unlearning)
            unlearn_filter = make_defense_filter(local.defense, &ep.defense);

        auto result = execute_attack(run.archive, train, run.partition, atk, local.fu_mode, unlearn_filter);
        ep.outcome.post_label = predict(local.model, result.unlearned_global, target.features);
        ep.outcome.success = ep.outcome.post_label != target.label;
        ep.unlearned_acc = compute_accuracy(local.model, result.unlearned_global, test);
        ep.plans = std::move(result.plans);
        ep.audit = std::move(result.audit);

        if (local.benign_baseline) {
            // Benign twin: the same records, unmodified, forgotten through the
            // honest server-side procedure.
            std::map<int, Batch> per_client;
            for (const auto& plan : ep.plans)
                for (auto di : plan.dataset_indices)
                    per_client[plan.attacker_client].push_back(train.examples[di]);
            if (per_client.empty()) {
                ep.outcome.benign_success = false;
            } else {
                std::vector<UnlearnRequest> reqs;
                for (auto& [client, batch] : per_client)
                    reqs.push_back({client, std::move(batch), local.fu_mode});
                auto benign = run_unlearning(local.fu_mode, run.archive, train, run.partition, reqs);
                ep.outcome.benign_success =
                    predict(local.model, benign.unlearned_global, target.features) != target.label;
            }
        }
    });

    double acc_sum = 0.0;
    std::size_t flips = 0, benign_flips = 0;
    run.audit = json::array();
    for (auto& ep : episodes) {
        bundle.per_target.push_back(ep.outcome);
        acc_sum += ep.unlearned_acc;
        flips += ep.outcome.success ? 1 : 0;
        benign_flips += ep.outcome.benign_success ? 1 : 0;
        for (auto& p : ep.plans) run.plans.push_back(std::move(p));
        for (auto& a : ep.audit) run.audit.push_back(a);
        for (auto& [round, norms] : ep.defense.norms) run.unlearn_defense.norms[round] = norms;
        for (auto& [round, f] : ep.defense.flags) run.unlearn_defense.flags[round] = f;
    }
    bundle.asr = static_cast<double>(flips) / static_cast<double>(targets.size());
    bundle.asr_b = static_cast<double>(benign_flips) / static_cast<double>(targets.size());
    bundle.acc_g_unlearned = acc_sum / static_cast<double>(targets.size());
    run.bundle = std::move(bundle);
    return run;
}

namespace detail {

inline void write_norms_csv(const HistoryArchive& archive, const DefenseReport* report,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw load_error(load_error::kind::io, "cannot write " + path);
    out << "round,client,norm,flagged\n";
    out.precision(17);
    for (const auto& rec : archive.records)
        for (const auto& [client, norm] : rec.gradient_norms) {
            bool flagged = false;
            if (report) {
                auto it = report->flags.find(rec.round_index);
                if (it != report->flags.end())
                    flagged = std::find(it->second.begin(), it->second.end(), client) != it->second.end();
            }
            out << rec.round_index << "," << client << "," << norm << "," << (flagged ? 1 : 0) << "\n";
        }
}

}  // namespace detail

// Runs `repetitions` seeds (seed + i), persists every artifact under
// output_dir/rep_<i>/, and returns the per-repetition bundles.
inline std::vector<MetricsBundle> run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    require(cfg.repetitions >= 1, "run_experiment: repetitions must be >= 1");
    fs::create_directories(cfg.output_dir);
    write_json_file(semantic_config_json(cfg), cfg.output_dir + "/config.json");

    std::vector<MetricsBundle> bundles;
    for (int i = 0; i < cfg.repetitions; ++i) {
        const std::uint64_t seed = cfg.federation.seed + static_cast<std::uint64_t>(i);
        ExperimentRun run = run_single(cfg, seed);
        const std::string dir = cfg.output_dir + "/rep_" + std::to_string(i);
        fs::create_directories(dir);
        save_archive(run.archive, dir + "/archive");
        write_json_file(partition_to_json(run.partition), dir + "/partition.json");
        write_json_file(run.audit, dir + "/audit.json");
        json plans = json::array();
        for (const auto& p : run.plans)
            plans.push_back({{"attacker", p.attacker_client},
                             {"target", p.target_index},
                             {"dataset_indices", p.dataset_indices},
                             {"chosen_label", p.chosen_label},
                             {"epsilon", p.epsilon},
                             {"epsilon_fraction", p.epsilon_fraction},
                             {"n", p.n_candidates},
                             {"p", p.p_selected},
                             {"alpha", p.alpha},
                             {"zeta", p.zeta},
                             {"shortfall", p.selection_shortfall}});
        write_json_file(plans, dir + "/plans.json");
        json bj = run.bundle;
        write_json_file(bj, dir + "/bundle.json");
        detail::write_norms_csv(run.archive, cfg.defense_phases.during_training ? &run.train_defense : nullptr,
                                dir + "/train_norms.csv");
        if (cfg.defense_enabled) {
            json dj{{"lambda", cfg.defense.lambda},
                    {"fence", cfg.defense.describe_fence()},
                    {"flags", json::object()}};
            for (const auto& [round, flagsv] : run.unlearn_defense.flags)
                dj["flags"][std::to_string(round)] = flagsv;
            write_json_file(dj, dir + "/defense_report.json");
        }
        bundles.push_back(std::move(run.bundle));
    }
    return bundles;
}

}  // namespace fedmua
