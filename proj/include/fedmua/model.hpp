#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fedmua/error.hpp"
#include "fedmua/example.hpp"
#include "fedmua/param_vector.hpp"
#include "fedmua/rng.hpp"

namespace fedmua {

enum class Activation { relu, tanh };

// Architecture description for a softmax classifier: an empty hidden_layers
// list is multinomial logistic regression, otherwise a fully connected MLP.
// The l2 penalty applies to every parameter (weights and biases), so the
// regularized Hessian is the data Hessian plus l2_penalty * I exactly.
struct ModelSpec {
    std::size_t input_dim = 0;
    int class_count = 2;
    std::vector<std::size_t> hidden_layers;
    Activation activation = Activation::relu;
    double l2_penalty = 0.0;

    void validate() const {
        require(input_dim > 0, "ModelSpec: input_dim must be positive");
        require(class_count >= 2, "ModelSpec: class_count must be >= 2");
        for (auto h : hidden_layers) require(h > 0, "ModelSpec: hidden layer size must be positive");
        require(l2_penalty >= 0.0, "ModelSpec: l2_penalty must be nonnegative");
    }

    // Layer sizes including input and output.
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(input_dim);
        for (auto h : hidden_layers) dims.push_back(h);
        dims.push_back(static_cast<std::size_t>(class_count));
        return dims;
    }

    Manifest manifest() const {
        validate();
        Manifest m;
        const auto dims = layer_dims();
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            m.push_back({"W" + std::to_string(l), {dims[l + 1], dims[l]}});
            m.push_back({"b" + std::to_string(l), {dims[l + 1]}});
        }
        return m;
    }

    std::size_t param_count() const { return manifest_count(manifest()); }
};

struct LossReport {
    double loss = 0.0;
    bool correct = false;
};

namespace detail {

inline double activate(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activation value (valid for relu and tanh).
inline double activate_grad_from_value(Activation a, double value) {
    return a == Activation::relu ? (value > 0.0 ? 1.0 : 0.0) : 1.0 - value * value;
}

// Scratch space reused across the examples of one batch.
struct Workspace {
    std::vector<std::vector<double>> activations;  // per layer, activations[0] = input copy
    std::vector<double> delta, delta_prev;

    void resize(const std::vector<std::size_t>& dims) {
        activations.resize(dims.size());
        for (std::size_t l = 0; l < dims.size(); ++l) activations[l].resize(dims[l]);
        std::size_t widest = 0;
        for (auto d : dims) widest = std::max(widest, d);
        delta.resize(widest);
        delta_prev.resize(widest);
    }
};

// Computes logits into ws.activations.back(); hidden activations retained for backprop.
inline void forward_raw(const ModelSpec& spec, const double* w, const double* x, Workspace& ws) {
    const auto dims = spec.layer_dims();
    std::copy(x, x + dims[0], ws.activations[0].begin());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const double* W = w + off;
        const double* b = w + off + in * out;
        const double* a = ws.activations[l].data();
        double* z = ws.activations[l + 1].data();
        for (std::size_t o = 0; o < out; ++o) {
            const double* row = W + o * in;
            double s = b[o];
            for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
            z[o] = s;
        }
        const bool is_hidden = (l + 2 < dims.size());
        if (is_hidden)
            for (std::size_t o = 0; o < out; ++o) z[o] = activate(spec.activation, z[o]);
        off += in * out + out;
    }
}

// Softmax in place; returns log-sum-exp of the original logits.
inline double softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        s += v;
    }
    for (auto& v : z) v /= s;
    return m + std::log(s);
}

}  // namespace detail

// Glorot-uniform weights, zero biases, all draws from one seeded engine in
// manifest order.
inline ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    const auto dims = spec.layer_dims();
    std::vector<double> values(spec.param_count(), 0.0);
    auto eng = make_engine(derive_seed(seed, stream::init));
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l], out = dims[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (std::size_t i = 0; i < in * out; ++i) values[off + i] = dist(eng);
        off += in * out + out;  // biases stay zero
    }
    return ParamVector(std::move(values), spec.manifest());
}

// Class probabilities for one input.
inline std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                                   const std::vector<double>& x) {
    spec.validate();
    require(x.size() == spec.input_dim, "forward: feature length does not match input_dim");
    require(params.manifest == spec.manifest(), "forward: params do not match spec manifest");
    detail::Workspace ws;
    ws.resize(spec.layer_dims());
    detail::forward_raw(spec, params.values.data(), x.data(), ws);
    auto probs = ws.activations.back();
    detail::softmax_inplace(probs);
    return probs;
}

// Argmax with ties broken toward the lower class index.
inline int predict(const ModelSpec& spec, const ParamVector& params, const std::vector<double>& x) {
    const auto probs = forward(spec, params, x);
    int best = 0;
    for (int c = 1; c < spec.class_count; ++c)
        if (probs[c] > probs[best]) best = c;
    return best;
}

inline LossReport evaluate_example(const ModelSpec& spec, const ParamVector& params,
                                   const Example& ex) {
    require(ex.label >= 0 && ex.label < spec.class_count, "evaluate_example: label out of range");
    const auto probs = forward(spec, params, ex.features);
    int best = 0;
    for (int c = 1; c < spec.class_count; ++c)
        if (probs[c] > probs[best]) best = c;
    double lse_loss = -std::log(std::max(probs[ex.label], 1e-300));
    return {lse_loss, best == ex.label};
}

// Mean cross-entropy over the batch plus 0.5 * l2_penalty * ||w||^2, and its
// gradient. Gradient layout matches the parameter manifest.
inline std::pair<double, ParamVector> loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                                                    const Batch& batch) {
    spec.validate();
    require(!batch.empty(), "loss_and_grad: empty batch");
    require(params.manifest == spec.manifest(), "loss_and_grad: params do not match spec manifest");

    const auto dims = spec.layer_dims();
    const double* w = params.values.data();
    ParamVector grad = ParamVector::zeros_like(params);
    double* g = grad.values.data();

    detail::Workspace ws;
    ws.resize(dims);

    // Per-layer parameter offsets.
    std::vector<std::size_t> offsets(dims.size() - 1);
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            offsets[l] = off;
            off += dims[l] * dims[l + 1] + dims[l + 1];
        }
    }

    double total_ce = 0.0;
    for (const auto& ex : batch) {
        require(ex.features.size() == spec.input_dim, "loss_and_grad: feature length mismatch");
        require(ex.label >= 0 && ex.label < spec.class_count, "loss_and_grad: label out of range");

        detail::forward_raw(spec, w, ex.features.data(), ws);
        auto& out = ws.activations.back();
        const double label_logit = out[static_cast<std::size_t>(ex.label)];
        const double lse = detail::softmax_inplace(out);
        total_ce += lse - label_logit;

        // Output delta: p - e_y.
        const std::size_t n_layers = dims.size() - 1;
        double* delta = ws.delta.data();
        for (std::size_t c = 0; c < out.size(); ++c) delta[c] = out[c];
        delta[static_cast<std::size_t>(ex.label)] -= 1.0;

        for (std::size_t l = n_layers; l-- > 0;) {
            const std::size_t in = dims[l], outn = dims[l + 1];
            const double* a = ws.activations[l].data();
            double* gW = g + offsets[l];
            double* gb = g + offsets[l] + in * outn;
            for (std::size_t o = 0; o < outn; ++o) {
                const double d = delta[o];
                double* grow = gW + o * in;
                for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
                gb[o] += d;
            }
            if (l > 0) {
                const double* W = w + offsets[l];
                double* dprev = ws.delta_prev.data();
                for (std::size_t i = 0; i < in; ++i) dprev[i] = 0.0;
                for (std::size_t o = 0; o < outn; ++o) {
                    const double d = delta[o];
                    const double* row = W + o * in;
                    for (std::size_t i = 0; i < in; ++i) dprev[i] += d * row[i];
                }
                for (std::size_t i = 0; i < in; ++i)
                    dprev[i] *= detail::activate_grad_from_value(spec.activation, a[i]);
                std::swap(ws.delta, ws.delta_prev);
                delta = ws.delta.data();
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        g[i] = g[i] * inv_n + spec.l2_penalty * params.values[i];
        sq += params.values[i] * params.values[i];
    }
    const double loss = total_ce * inv_n + 0.5 * spec.l2_penalty * sq;
    return {loss, std::move(grad)};
}

// Hessian-vector product by central differences of the gradient:
// (grad(w + h v) - grad(w - h v)) / (2 h), h = 1e-3 / (1 + ||v||).
inline ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                       const ParamVector& v) {
    require_same_manifest(params, v, "hvp");
    const double h = 1e-3 / (1.0 + norm2(v));
    ParamVector wp = params, wm = params;
    axpy(h, v, wp);
    axpy(-h, v, wm);
    auto gp = loss_and_grad(spec, wp, batch).second;
    const auto gm = loss_and_grad(spec, wm, batch).second;
    axpy(-1.0, gm, gp);
    scale(gp, 1.0 / (2.0 * h));
    return gp;
}

struct InverseHvpResult {
    ParamVector solution;
    bool converged = false;
    int iterations = 0;
    double relative_residual = 0.0;
};

// Solves (H + damping I) x = b by conjugate gradient, applying H through hvp.
// Returns the best iterate with converged=false if tol is not met in
// max_iters. Fully deterministic for identical inputs.
inline InverseHvpResult inverse_hvp(const ModelSpec& spec, const ParamVector& params,
                                    const Batch& batch, const ParamVector& b, double damping = 0.01,
                                    int max_iters = 200, double tol = 1e-6) {
    require(damping > 0.0, "inverse_hvp: damping must be positive");
    require(tol > 0.0, "inverse_hvp: tol must be positive");
    require(max_iters >= 1, "inverse_hvp: max_iters must be >= 1");
    require_same_manifest(params, b, "inverse_hvp");

    const double bnorm = norm2(b);
    InverseHvpResult res{ParamVector::zeros_like(b), true, 0, 0.0};
    if (bnorm == 0.0) return res;

    auto apply = [&](const ParamVector& v) {
        ParamVector out = hvp(spec, params, batch, v);
        axpy(damping, v, out);
        return out;
    };

    ParamVector x = ParamVector::zeros_like(b);
    ParamVector r = b;           // r = b - A x, x = 0
    ParamVector p = r;
    double rs = dot(r, r);
    ParamVector best_x = x;
    double best_res = std::sqrt(rs);

    int it = 0;
    for (; it < max_iters; ++it) {
        if (std::sqrt(rs) <= tol * bnorm) break;
        ParamVector Ap = apply(p);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0) || !std::isfinite(pAp)) break;  // curvature failure, keep best iterate
        const double alpha = rs / pAp;
        axpy(alpha, p, x);
        axpy(-alpha, Ap, r);
        const double rs_new = dot(r, r);
        if (std::sqrt(rs_new) < best_res) {
            best_res = std::sqrt(rs_new);
            best_x = x;
        }
        const double beta = rs_new / rs;
        rs = rs_new;
        scale(p, beta);
        axpy(1.0, r, p);
    }

    res.iterations = it;
    const double final_res = std::sqrt(rs);
    if (final_res <= best_res) {
        best_res = final_res;
        best_x = std::move(x);
    }
    res.relative_residual = best_res / bnorm;
    res.converged = best_res <= tol * bnorm;
    res.solution = std::move(best_x);
    return res;
}

}  // namespace fedmua
