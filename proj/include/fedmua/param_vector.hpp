#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "fedmua/error.hpp"

namespace fedmua {

// One named tensor slice of a flattened parameter vector.
struct LayerEntry {
    std::string name;
    std::vector<std::size_t> shape;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    bool operator==(const LayerEntry& o) const { return name == o.name && shape == o.shape; }
};

using Manifest = std::vector<LayerEntry>;

inline std::size_t manifest_count(const Manifest& m) {
    std::size_t n = 0;
    for (const auto& e : m) n += e.count();
    return n;
}

// Flattened model parameters plus the layer manifest describing the layout.
// All arithmetic helpers preserve the manifest and check compatibility.
struct ParamVector {
    std::vector<double> values;
    Manifest manifest;

    ParamVector() = default;
    ParamVector(std::vector<double> v, Manifest m) : values(std::move(v)), manifest(std::move(m)) {
        require(values.size() == manifest_count(manifest),
                "ParamVector: manifest count does not match value count");
    }

    std::size_t size() const { return values.size(); }

    static ParamVector zeros_like(const ParamVector& other) {
        return ParamVector(std::vector<double>(other.size(), 0.0), other.manifest);
    }

    bool same_manifest(const ParamVector& o) const { return manifest == o.manifest; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_manifest(const ParamVector& a, const ParamVector& b, const char* where) {
    require(a.same_manifest(b), std::string(where) + ": manifest mismatch");
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    require_same_manifest(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

inline double norm2(const ParamVector& a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    require_same_manifest(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y.values[i] += alpha * x.values[i];
}

inline void scale(ParamVector& a, double alpha) {
    for (auto& v : a.values) v *= alpha;
}

inline ParamVector scaled(const ParamVector& a, double alpha) {
    ParamVector out = a;
    scale(out, alpha);
    return out;
}

inline ParamVector add(const ParamVector& a, const ParamVector& b) {
    ParamVector out = a;
    axpy(1.0, b, out);
    return out;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
    ParamVector out = a;
    axpy(-1.0, b, out);
    return out;
}

// Sum of per-layer l2 norms. This is the magnitude statistic used for the
// round-level outlier screen, not the plain l2 norm of the whole vector.
inline double layer_norm_sum(const ParamVector& a) {
    double total = 0.0;
    std::size_t off = 0;
    for (const auto& e : a.manifest) {
        double s = 0.0;
        for (std::size_t i = 0; i < e.count(); ++i) {
            const double v = a.values[off + i];
            s += v * v;
        }
        total += std::sqrt(s);
        off += e.count();
    }
    return total;
}

}  // namespace fedmua
