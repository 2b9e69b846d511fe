#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/example.hpp"
#include "fedmua/rng.hpp"

namespace fedmua {

// Immutable after construction; ordering is stable across loads of the same
// source so seeded index-based sampling stays reproducible.
struct Dataset {
    std::vector<Example> examples;
    std::size_t feature_dim = 0;
    int class_count = 2;
    std::string name;

    std::size_t size() const { return examples.size(); }

    void validate() const {
        require(feature_dim > 0, "Dataset: feature_dim must be positive");
        require(class_count >= 2, "Dataset: class_count must be >= 2");
        for (const auto& ex : examples) {
            require(ex.features.size() == feature_dim, "Dataset: inconsistent feature length");
            require(ex.label >= 0 && ex.label < class_count, "Dataset: label out of range");
        }
    }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw load_error(load_error::kind::truncated, "truncated IDX header: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

// IDX image/label pair (the canonical MNIST binary layout, big-endian).
// Pixels are scaled to [0, 1]; class count is fixed at 10.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw load_error(load_error::kind::io, "cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw load_error(load_error::kind::io, "cannot open " + labels_path);

    const std::uint32_t img_magic = detail::read_be32(img, images_path);
    if (img_magic != 0x00000803u)
        throw load_error(load_error::kind::bad_magic, "bad image magic in " + images_path);
    const std::uint32_t n_images = detail::read_be32(img, images_path);
    const std::uint32_t rows = detail::read_be32(img, images_path);
    const std::uint32_t cols = detail::read_be32(img, images_path);

    const std::uint32_t lab_magic = detail::read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw load_error(load_error::kind::bad_magic, "bad label magic in " + labels_path);
    const std::uint32_t n_labels = detail::read_be32(lab, labels_path);

    if (n_images != n_labels)
        throw load_error(load_error::kind::count_mismatch,
                         "image/label record counts differ: " + std::to_string(n_images) + " vs " +
                             std::to_string(n_labels));

    Dataset ds;
    ds.feature_dim = static_cast<std::size_t>(rows) * cols;
    ds.class_count = 10;
    ds.name = images_path;
    ds.examples.resize(n_images);

    std::vector<unsigned char> pix(ds.feature_dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
        if (!img) throw load_error(load_error::kind::truncated, "truncated image data: " + images_path);
        auto& ex = ds.examples[i];
        ex.features.resize(ds.feature_dim);
        for (std::size_t j = 0; j < pix.size(); ++j) ex.features[j] = pix[j] / 255.0;
        unsigned char y;
        lab.read(reinterpret_cast<char*>(&y), 1);
        if (!lab) throw load_error(load_error::kind::truncated, "truncated label data: " + labels_path);
        if (y > 9) throw load_error(load_error::kind::parse, "label out of range in " + labels_path);
        ex.label = y;
    }
    return ds;
}

// Declares how a CSV becomes features: every non-label column is numeric
// unless listed in categorical_columns. Categoricals are one-hot encoded with
// level order = first-appearance order; numerics are min-max scaled to [0, 1]
// from the file's own statistics (constant columns map to 0).
struct CsvSchema {
    std::vector<std::string> categorical_columns;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw load_error(load_error::kind::io, "cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw load_error(load_error::kind::truncated, "empty CSV: " + path);
    const auto header = detail::split_csv_line(line);

    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw load_error(load_error::kind::missing_column, "label column '" + label_column +
                                                               "' not found in " + path);

    std::vector<bool> is_categorical(header.size(), false);
    for (const auto& name : schema.categorical_columns) {
        bool found = false;
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) {
                is_categorical[i] = true;
                found = true;
            }
        if (!found)
            throw load_error(load_error::kind::missing_column,
                             "categorical column '" + name + "' not found in " + path);
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t row_index = 1;
    while (std::getline(in, line)) {
        ++row_index;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw load_error(load_error::kind::parse,
                             "row " + std::to_string(row_index) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()));
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw load_error(load_error::kind::truncated, "CSV has no data rows: " + path);

    // Column statistics / level tables.
    std::vector<std::vector<std::string>> levels(header.size());
    std::vector<double> col_min(header.size(), 0.0), col_max(header.size(), 0.0);
    std::vector<std::vector<double>> numeric(header.size());
    std::map<std::string, int> label_levels;

    auto parse_number = [&](const std::string& cell, std::size_t col, std::size_t row) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(cell, &pos);
            if (pos != cell.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw load_error(load_error::kind::parse, "row " + std::to_string(row) +
                                                          ": non-numeric cell '" + cell +
                                                          "' in numeric column '" + header[col] + "'");
        }
    };

    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto& cell = rows[r][c];
            if (c == label_idx) {
                if (!label_levels.count(cell)) {
                    // Numeric labels keep their own value when they are small
                    // nonnegative integers; otherwise levels are numbered in
                    // sorted first-appearance order below.
                    label_levels[cell] = -1;
                }
            } else if (is_categorical[c]) {
                auto& lv = levels[c];
                if (std::find(lv.begin(), lv.end(), cell) == lv.end()) lv.push_back(cell);
            } else {
                numeric[c].push_back(parse_number(cell, c, r + 2));
            }
        }
    }

    // Label encoding: prefer integer labels as written, else dense codes.
    bool labels_integral = true;
    int max_label = 0;
    for (const auto& [text, _] : label_levels) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(text, &pos);
            if (pos != text.size() || v < 0 || v > 4096) throw std::invalid_argument("range");
            max_label = std::max(max_label, v);
        } catch (const std::exception&) {
            labels_integral = false;
            break;
        }
    }
    if (labels_integral) {
        for (auto& [text, code] : label_levels) code = std::stoi(text);
    } else {
        int next = 0;
        for (auto& [text, code] : label_levels) code = next++;
        max_label = next - 1;
    }

    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!numeric[c].empty()) {
            col_min[c] = *std::min_element(numeric[c].begin(), numeric[c].end());
            col_max[c] = *std::max_element(numeric[c].begin(), numeric[c].end());
        }
    }

    std::size_t feature_dim = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_idx) continue;
        feature_dim += is_categorical[c] ? levels[c].size() : 1;
    }

    Dataset ds;
    ds.feature_dim = feature_dim;
    ds.class_count = std::max(2, max_label + 1);
    ds.name = path;
    ds.examples.reserve(rows.size());

    for (std::size_t r = 0; r < rows.size(); ++r) {
        Example ex;
        ex.features.reserve(feature_dim);
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto& cell = rows[r][c];
            if (c == label_idx) {
                ex.label = label_levels.at(cell);
            } else if (is_categorical[c]) {
                for (const auto& lv : levels[c]) ex.features.push_back(cell == lv ? 1.0 : 0.0);
            } else {
                const double v = parse_number(cell, c, r + 2);
                const double range = col_max[c] - col_min[c];
                ex.features.push_back(range > 0.0 ? (v - col_min[c]) / range : 0.0);
            }
        }
        ds.examples.push_back(std::move(ex));
    }
    ds.validate();
    return ds;
}

// Plain numeric dump: header f0..f{d-1},label. Feature values round-trip
// exactly via max_digits10 formatting.
inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw load_error(load_error::kind::io, "cannot write " + path);
    for (std::size_t j = 0; j < ds.feature_dim; ++j) out << "f" << j << ",";
    out << "label\n";
    out.precision(17);
    for (const auto& ex : ds.examples) {
        for (double v : ex.features) out << v << ",";
        out << ex.label << "\n";
    }
}

// --- Synthetic sources -----------------------------------------------------
//
// Deterministic generators used by tests and desk-scale experiments.

// Two gaussian blobs, linearly separable at the given margin.
inline Dataset make_blobs(std::size_t count, std::size_t dim, double separation, std::uint64_t seed,
                          const std::string& name = "blobs") {
    Dataset ds;
    ds.feature_dim = dim;
    ds.class_count = 2;
    ds.name = name;
    auto eng = make_engine(derive_seed(seed, stream::synthetic, 1));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> direction(dim);
    for (auto& v : direction) v = noise(eng);
    double dn = 0.0;
    for (double v : direction) dn += v * v;
    dn = std::sqrt(dn);
    for (auto& v : direction) v /= dn;
    ds.examples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& ex = ds.examples[i];
        ex.label = static_cast<int>(i % 2);
        const double sign = ex.label == 0 ? -1.0 : 1.0;
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            ex.features[j] = sign * separation * direction[j] + noise(eng);
    }
    return ds;
}

// Two gaussian blobs squeezed into the unit cube: the domain crafted
// attack samples are clamped to. Class means sit at 0.5 +- spread along a
// random direction, noise sigma keeps virtually all mass inside [0,1].
inline Dataset make_blobs_unit(std::size_t count, std::size_t dim, std::uint64_t seed,
                               double spread = 0.18, double sigma = 0.08,
                               const std::string& name = "blobs01") {
    Dataset ds;
    ds.feature_dim = dim;
    ds.class_count = 2;
    ds.name = name;
    auto eng = make_engine(derive_seed(seed, stream::synthetic, 6));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> direction(dim);
    double dn = 0.0;
    for (auto& v : direction) {
        v = noise(eng);
        dn += v * v;
    }
    dn = std::sqrt(dn);
    for (auto& v : direction) v /= dn;
    ds.examples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& ex = ds.examples[i];
        ex.label = static_cast<int>(i % 2);
        const double sign = ex.label == 0 ? -1.0 : 1.0;
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            ex.features[j] =
                std::clamp(0.5 + sign * spread * direction[j] + sigma * noise(eng), 0.0, 1.0);
    }
    return ds;
}

// Ten-class prototype-plus-noise images in [0,1]^dim. Prototypes share a
// common background and overlap pairwise, so classes confuse the way digit
// data does while a small MLP still separates them well.
inline Dataset make_digits(std::size_t count, std::uint64_t seed, std::size_t dim = 784,
                           int classes = 10, double noise_sigma = 0.25,
                           const std::string& name = "digits") {
    Dataset ds;
    ds.feature_dim = dim;
    ds.class_count = classes;
    ds.name = name;
    auto proto_eng = make_engine(derive_seed(seed, stream::synthetic, 2));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<double> background(dim);
    for (auto& v : background) v = uni(proto_eng) < 0.15 ? 0.3 * uni(proto_eng) : 0.0;

    std::vector<std::vector<double>> protos(static_cast<std::size_t>(classes));
    for (auto& p : protos) {
        p = background;
        for (std::size_t j = 0; j < dim; ++j)
            if (uni(proto_eng) < 0.18) p[j] = 0.45 + 0.55 * uni(proto_eng);
    }
    // Pairwise overlap: each class borrows a patch from the next one, which
    // gives every class a natural runner-up.
    for (int c = 0; c < classes; ++c) {
        auto& p = protos[static_cast<std::size_t>(c)];
        const auto& q = protos[static_cast<std::size_t>((c + 1) % classes)];
        for (std::size_t j = 0; j < dim; ++j)
            if (uni(proto_eng) < 0.08) p[j] = q[j];
    }

    auto eng = make_engine(derive_seed(seed, stream::synthetic, 3));
    std::normal_distribution<double> noise(0.0, noise_sigma);
    ds.examples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& ex = ds.examples[i];
        ex.label = static_cast<int>(i % static_cast<std::size_t>(classes));
        const auto& p = protos[static_cast<std::size_t>(ex.label)];
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            ex.features[j] = std::clamp(p[j] + noise(eng), 0.0, 1.0);
    }
    return ds;
}

// Binary-feature, binary-label shopping-basket style data.
inline Dataset make_purchase_like(std::size_t count, std::uint64_t seed, std::size_t dim = 600,
                                  const std::string& name = "purchase") {
    Dataset ds;
    ds.feature_dim = dim;
    ds.class_count = 2;
    ds.name = name;
    auto proto_eng = make_engine(derive_seed(seed, stream::synthetic, 4));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::vector<double>> prob(2, std::vector<double>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
        const double base = 0.05 + 0.4 * uni(proto_eng);
        prob[0][j] = base;
        prob[1][j] = std::clamp(base + (uni(proto_eng) < 0.2 ? 0.35 : 0.0), 0.0, 0.95);
    }
    auto eng = make_engine(derive_seed(seed, stream::synthetic, 5));
    ds.examples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& ex = ds.examples[i];
        ex.label = static_cast<int>(i % 2);
        ex.features.resize(dim);
        for (std::size_t j = 0; j < dim; ++j)
            ex.features[j] = uni(eng) < prob[static_cast<std::size_t>(ex.label)][j] ? 1.0 : 0.0;
    }
    return ds;
}

}  // namespace fedmua
