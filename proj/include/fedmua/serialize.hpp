#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "fedmua/aggregation.hpp"
#include "fedmua/dataset.hpp"
#include "fedmua/error.hpp"
#include "fedmua/federation.hpp"
#include "fedmua/partition.hpp"

namespace fedmua {

using json = nlohmann::json;

inline void to_json(json& j, const AggregationRule& r) {
    j = json{{"rule", [&] {
                  switch (r.kind) {
                      case AggregationRule::Kind::fedavg: return "fedavg";
                      case AggregationRule::Kind::median: return "median";
                      case AggregationRule::Kind::trimmed_mean: return "trimmed_mean";
                      case AggregationRule::Kind::krum: return "krum";
                  }
                  return "fedavg";
              }()},
             {"k", r.k}};
}

inline void from_json(const json& j, AggregationRule& r) {
    const std::string name = j.at("rule").get<std::string>();
    r.k = j.value("k", 0);
    if (name == "fedavg") r.kind = AggregationRule::Kind::fedavg;
    else if (name == "median") r.kind = AggregationRule::Kind::median;
    else if (name == "trimmed_mean") r.kind = AggregationRule::Kind::trimmed_mean;
    else if (name == "krum") r.kind = AggregationRule::Kind::krum;
    else throw contract_error("unknown aggregation rule: " + name);
}

inline void to_json(json& j, const ModelSpec& s) {
    j = json{{"input_dim", s.input_dim},
             {"class_count", s.class_count},
             {"hidden_layers", s.hidden_layers},
             {"activation", s.activation == Activation::relu ? "relu" : "tanh"},
             {"l2_penalty", s.l2_penalty}};
}

inline void from_json(const json& j, ModelSpec& s) {
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.class_count = j.at("class_count").get<int>();
    s.hidden_layers = j.value("hidden_layers", std::vector<std::size_t>{});
    const std::string act = j.value("activation", "relu");
    if (act == "relu") s.activation = Activation::relu;
    else if (act == "tanh") s.activation = Activation::tanh;
    else throw contract_error("unknown activation: " + act);
    s.l2_penalty = j.value("l2_penalty", 0.0);
}

inline void to_json(json& j, const FederationConfig& c) {
    j = json{{"num_clients", c.num_clients},
             {"clients_per_round", c.clients_per_round},
             {"rounds", c.rounds},
             {"local_epochs", c.local_epochs},
             {"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate},
             {"momentum", c.momentum},
             {"aggregation", c.aggregation},
             {"seed", c.seed}};
}

inline void from_json(const json& j, FederationConfig& c) {
    c.num_clients = j.at("num_clients").get<int>();
    c.clients_per_round = j.at("clients_per_round").get<int>();
    c.rounds = j.at("rounds").get<int>();
    c.local_epochs = j.at("local_epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.aggregation = j.at("aggregation").get<AggregationRule>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(json& j, const Example& ex) {
    j = json{{"features", ex.features}, {"label", ex.label}};
}

inline void from_json(const json& j, Example& ex) {
    ex.features = j.at("features").get<std::vector<double>>();
    ex.label = j.at("label").get<int>();
}

// Partition files are the plain {client_id: [indices]} mapping; the scheme
// travels under a reserved key.
inline json partition_to_json(const Partition& p) {
    json j;
    for (const auto& [client, idxs] : p.assignments) j[std::to_string(client)] = idxs;
    j["_scheme"] = p.scheme.describe();
    return j;
}

inline Partition partition_from_json(const json& j) {
    Partition p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "_scheme") {
            const std::string s = it.value().get<std::string>();
            p.scheme = s.rfind("dirichlet", 0) == 0
                           ? PartitionScheme::dirichlet(std::stod(s.substr(10)))
                           : PartitionScheme::iid();
            continue;
        }
        p.assignments[std::stoi(it.key())] = it.value().get<std::vector<std::size_t>>();
    }
    return p;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw load_error(load_error::kind::io, "cannot write " + path);
    out << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw load_error(load_error::kind::io, "cannot read " + path);
    json j;
    in >> j;
    return j;
}

}  // namespace fedmua
