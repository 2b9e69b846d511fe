#pragma once

// Independent reference implementations used as test oracles. Everything in
// here recomputes results from definitions, without calling back into the
// code paths under test.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "fedmua/fedmua.hpp"

namespace oracle {

using fedmua::Batch;
using fedmua::ModelSpec;
using fedmua::ParamVector;

// Central finite differences of the loss.
inline ParamVector finite_diff_grad(const ModelSpec& spec, const ParamVector& params,
                                    const Batch& batch, double h = 1e-5) {
    ParamVector g = ParamVector::zeros_like(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamVector wp = params, wm = params;
        wp.values[i] += h;
        wm.values[i] -= h;
        const double lp = fedmua::loss_and_grad(spec, wp, batch).first;
        const double lm = fedmua::loss_and_grad(spec, wm, batch).first;
        g.values[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

// Closed-form Hessian of mean cross-entropy + l2 for the linear softmax
// model: per example, (diag(p) - p p^T) kron [x;1][x;1]^T, averaged, plus
// l2 * I. Parameter order matches the manifest: W (C x D row-major), then b.
inline std::vector<std::vector<double>> logistic_hessian(const ModelSpec& spec,
                                                         const ParamVector& params,
                                                         const Batch& batch) {
    const std::size_t D = spec.input_dim;
    const auto C = static_cast<std::size_t>(spec.class_count);
    const std::size_t dim = C * D + C;
    std::vector<std::vector<double>> H(dim, std::vector<double>(dim, 0.0));

    auto pidx = [&](std::size_t c, std::size_t d) { return c * D + d; };  // weight index
    auto bidx = [&](std::size_t c) { return C * D + c; };

    for (const auto& ex : batch) {
        const auto p = fedmua::forward(spec, params, ex.features);
        for (std::size_t c1 = 0; c1 < C; ++c1) {
            for (std::size_t c2 = 0; c2 < C; ++c2) {
                const double a = p[c1] * ((c1 == c2 ? 1.0 : 0.0) - p[c2]);
                for (std::size_t d1 = 0; d1 < D; ++d1)
                    for (std::size_t d2 = 0; d2 < D; ++d2)
                        H[pidx(c1, d1)][pidx(c2, d2)] += a * ex.features[d1] * ex.features[d2];
                for (std::size_t d1 = 0; d1 < D; ++d1) {
                    H[pidx(c1, d1)][bidx(c2)] += a * ex.features[d1];
                    H[bidx(c1)][pidx(c2, d1)] += a * ex.features[d1];
                }
                H[bidx(c1)][bidx(c2)] += a;
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto& row : H)
        for (auto& v : row) v *= inv_n;
    for (std::size_t i = 0; i < dim; ++i) H[i][i] += spec.l2_penalty;
    return H;
}

inline std::vector<double> mat_vec(const std::vector<std::vector<double>>& A,
                                   const std::vector<double>& x) {
    std::vector<double> y(A.size(), 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += A[i][j] * x[j];
    return y;
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = A.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(A[r][col]) > std::fabs(A[pivot][col])) pivot = r;
        std::swap(A[col], A[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
        x[i] = s / A[i][i];
    }
    return x;
}

inline std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {  // average ranks across ties
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

// --- Aggregation oracles (per-definition recomputation) ---------------------

inline ParamVector mean_oracle(const std::vector<ParamVector>& updates) {
    ParamVector out = ParamVector::zeros_like(updates.front());
    for (std::size_t t = 0; t < out.size(); ++t) {
        double s = 0.0;
        for (const auto& u : updates) s += u.values[t];
        out.values[t] = s / static_cast<double>(updates.size());
    }
    return out;
}

inline ParamVector median_oracle(const std::vector<ParamVector>& updates) {
    ParamVector out = ParamVector::zeros_like(updates.front());
    for (std::size_t t = 0; t < out.size(); ++t) {
        std::vector<double> col;
        for (const auto& u : updates) col.push_back(u.values[t]);
        std::sort(col.begin(), col.end());
        const std::size_t n = col.size();
        out.values[t] = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return out;
}

inline ParamVector trimmed_mean_oracle(const std::vector<ParamVector>& updates, int k) {
    ParamVector out = ParamVector::zeros_like(updates.front());
    for (std::size_t t = 0; t < out.size(); ++t) {
        std::vector<double> col;
        for (const auto& u : updates) col.push_back(u.values[t]);
        std::sort(col.begin(), col.end());
        double s = 0.0;
        for (std::size_t i = static_cast<std::size_t>(k); i < col.size() - static_cast<std::size_t>(k); ++i)
            s += col[i];
        out.values[t] = s / static_cast<double>(col.size() - 2 * static_cast<std::size_t>(k));
    }
    return out;
}

inline std::size_t krum_oracle(const std::vector<ParamVector>& updates, int m) {
    const std::size_t n = updates.size();
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dists;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t t = 0; t < updates[i].size(); ++t) {
                const double d = updates[i].values[t] - updates[j].values[t];
                s += d * d;
            }
            dists.push_back(s);
        }
        std::sort(dists.begin(), dists.end());
        double score = 0.0;
        for (std::size_t t = 0; t < n - static_cast<std::size_t>(m) - 2; ++t) score += dists[t];
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

// --- Quantile / selection oracles -------------------------------------------

inline double quantile_oracle(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    if (xs.size() == 1) return xs[0];
    const double pos = q * static_cast<double>(xs.size() - 1);
    const double lo = std::floor(pos), hi = std::ceil(pos);
    if (lo == hi) return xs[static_cast<std::size_t>(pos)];
    return xs[static_cast<std::size_t>(lo)] * (hi - pos) + xs[static_cast<std::size_t>(hi)] * (pos - lo);
}

// Literal restatement of the candidate/same-label selection rule.
struct SelectionOracle {
    std::vector<std::size_t> indices;
    int chosen_label = 0;
};

inline SelectionOracle select_oracle(const std::vector<double>& scores,
                                     const std::vector<int>& labels, std::size_t n, std::size_t p) {
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] < 0) neg.push_back(i);
    std::sort(neg.begin(), neg.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
    });
    if (neg.size() > n) neg.resize(n);
    std::map<int, std::size_t> counts;
    for (auto i : neg) counts[labels[i]]++;
    int best_label = 0;
    std::size_t best_count = 0;
    for (auto& [l, c] : counts)
        if (c > best_count) {
            best_label = l;
            best_count = c;
        }
    SelectionOracle out;
    out.chosen_label = best_label;
    for (auto i : neg)
        if (labels[i] == best_label && out.indices.size() < p) out.indices.push_back(i);
    return out;
}

// Mirror of the documented Dirichlet partitioning procedure, written against
// the documentation rather than the implementation.
inline std::map<int, std::vector<std::size_t>> dirichlet_oracle(const fedmua::Dataset& ds,
                                                                int clients, double beta,
                                                                std::uint64_t seed) {
    auto eng = fedmua::make_engine(fedmua::derive_seed(seed, fedmua::stream::partition));
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), eng);

    std::map<int, std::vector<std::size_t>> out;
    for (int c = 0; c < clients; ++c) out[c] = {};
    std::gamma_distribution<double> gamma(beta, 1.0);
    for (const auto& cls : by_class) {
        std::vector<double> shares(static_cast<std::size_t>(clients));
        double total = 0;
        for (auto& s : shares) {
            s = gamma(eng);
            total += s;
        }
        for (auto& s : shares) s /= total;
        // largest remainder
        std::vector<std::size_t> counts(shares.size());
        std::vector<std::pair<double, std::size_t>> rem(shares.size());
        std::size_t assigned = 0;
        for (std::size_t i = 0; i < shares.size(); ++i) {
            const double quota = shares[i] * static_cast<double>(cls.size());
            counts[i] = static_cast<std::size_t>(quota);
            rem[i] = {quota - static_cast<double>(counts[i]), i};
            assigned += counts[i];
        }
        std::stable_sort(rem.begin(), rem.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t j = 0; assigned < cls.size(); ++j, ++assigned) counts[rem[j % rem.size()].second]++;
        std::size_t off = 0;
        for (int c = 0; c < clients; ++c) {
            for (std::size_t t = 0; t < counts[static_cast<std::size_t>(c)]; ++t)
                out[c].push_back(cls[off + t]);
            off += counts[static_cast<std::size_t>(c)];
        }
    }
    for (auto& [_, v] : out) std::sort(v.begin(), v.end());
    return out;
}

// Trains a logistic model to (near) optimality with damped Newton steps.
// Used for leave-one-out retraining experiments on convex fixtures.
inline ParamVector train_logistic_newton(const ModelSpec& spec, const Batch& batch,
                                         std::uint64_t seed, int iters = 30) {
    ParamVector w = fedmua::init_params(spec, seed);
    for (int it = 0; it < iters; ++it) {
        const auto [loss, grad] = fedmua::loss_and_grad(spec, w, batch);
        (void)loss;
        auto H = logistic_hessian(spec, w, batch);
        for (std::size_t i = 0; i < H.size(); ++i) H[i][i] += 1e-9;
        const auto step = solve_dense(H, grad.values);
        double sq = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            w.values[i] -= step[i];
            sq += step[i] * step[i];
        }
        if (std::sqrt(sq) < 1e-12) break;
    }
    return w;
}

}  // namespace oracle
