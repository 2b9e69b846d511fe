#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/federation.hpp"
#include "fedmua/serialize.hpp"

namespace fedmua {

static_assert(std::endian::native == std::endian::little,
              "archive format is little-endian; big-endian hosts are not supported");

namespace detail {

inline void write_f64(std::ofstream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

inline void read_f64(std::ifstream& in, double* data, std::size_t count, const std::string& path) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw load_error(load_error::kind::truncated, "truncated round file: " + path);
}

inline std::string round_file_name(int round) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "round_%04d.bin", round);
    return buf;
}

}  // namespace detail

// Archive directory layout: manifest.json plus one binary file per round.
// Each round file is a flat little-endian f64 stream:
//   participant count, participant ids, the participants' update vectors in
//   id order, then global_before and global_after.
inline void save_archive(const HistoryArchive& archive, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    json manifest;
    manifest["config"] = archive.config;
    manifest["model_spec"] = archive.model_spec;
    manifest["rounds"] = archive.records.size();
    manifest["param_count"] = archive.model_spec.param_count();
    write_json_file(manifest, dir + "/manifest.json");

    for (const auto& rec : archive.records) {
        const std::string path = dir + "/" + detail::round_file_name(rec.round_index);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw load_error(load_error::kind::io, "cannot write " + path);
        const double n = static_cast<double>(rec.participant_ids.size());
        detail::write_f64(out, &n, 1);
        for (int id : rec.participant_ids) {
            const double v = static_cast<double>(id);
            detail::write_f64(out, &v, 1);
        }
        for (int id : rec.participant_ids) {
            const auto& u = rec.client_updates.at(id);
            detail::write_f64(out, u.values.data(), u.size());
        }
        detail::write_f64(out, rec.global_before.values.data(), rec.global_before.size());
        detail::write_f64(out, rec.global_after.values.data(), rec.global_after.size());
    }
}

inline HistoryArchive load_archive(const std::string& dir) {
    const json manifest = read_json_file(dir + "/manifest.json");
    HistoryArchive archive;
    archive.config = manifest.at("config").get<FederationConfig>();
    archive.model_spec = manifest.at("model_spec").get<ModelSpec>();
    const std::size_t rounds = manifest.at("rounds").get<std::size_t>();
    const std::size_t dim = archive.model_spec.param_count();
    const Manifest layer_manifest = archive.model_spec.manifest();

    for (std::size_t r = 0; r < rounds; ++r) {
        const std::string path = dir + "/" + detail::round_file_name(static_cast<int>(r));
        std::ifstream in(path, std::ios::binary);
        if (!in) throw load_error(load_error::kind::io, "cannot read " + path);
        RoundRecord rec;
        rec.round_index = static_cast<int>(r);
        double count = 0;
        detail::read_f64(in, &count, 1, path);
        const auto n = static_cast<std::size_t>(count);
        rec.participant_ids.resize(n);
        for (auto& id : rec.participant_ids) {
            double v = 0;
            detail::read_f64(in, &v, 1, path);
            id = static_cast<int>(v);
        }
        for (int id : rec.participant_ids) {
            std::vector<double> values(dim);
            detail::read_f64(in, values.data(), dim, path);
            ParamVector u(std::move(values), layer_manifest);
            rec.gradient_norms[id] = layer_norm_sum(u);
            rec.client_updates[id] = std::move(u);
        }
        std::vector<double> before(dim), after(dim);
        detail::read_f64(in, before.data(), dim, path);
        detail::read_f64(in, after.data(), dim, path);
        rec.global_before = ParamVector(std::move(before), layer_manifest);
        rec.global_after = ParamVector(std::move(after), layer_manifest);
        archive.records.push_back(std::move(rec));
    }
    return archive;
}

}  // namespace fedmua
