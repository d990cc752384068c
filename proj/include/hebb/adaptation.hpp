#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <utility>

#include "hebb/classifier.hpp"
#include "hebb/core.hpp"
#include "hebb/memory.hpp"

namespace hebb {

// Transient per-class update applied for one prediction, then discarded.
// Classes absent from the map are untouched.
struct AdaptationDelta {
    struct ClassDelta {
        Vec weight;        // delta for w_i
        double bias = 0.0; // delta for b_i
    };

    std::map<std::uint32_t, ClassDelta> by_class;

    bool empty() const { return by_class.empty(); }

    void accumulate(std::uint32_t i, const Vec& dw, double db, double scale, std::size_t dim) {
        ClassDelta& cd = by_class.try_emplace(i, ClassDelta{Vec(dim, 0.0), 0.0}).first->second;
        for (std::size_t j = 0; j < dim; ++j) cd.weight[j] += scale * dw[j];
        cd.bias += scale * db;
    }
};

enum class AdaptMode {
    Hebb,        // dynamic interpolation of MbPA and Hebbian updates
    MbPAOnly,    // gradient-based local adaptation only
    HebbV1,      // Hebbian update over N^new only, no MbPA
    HebbV2,      // like Hebb but Hebbian update over the full N
    HebbV3,      // fixed static interpolation weight instead of E_i
    MixtureOnly, // no parameter delta; prediction mixed at the output
};

struct AdaptationConfig {
    std::size_t k = 32;    // neighbors retrieved
    double eps = 1e-3;     // closeness kernel epsilon
    double lambda = 0.05;  // MbPA step size
    int steps = 5;         // MbPA gradient steps
    double eta = 0.2;      // Hebbian scale
    double beta = 0.9;     // decay rate of the interpolation weight
    AdaptMode mode = AdaptMode::Hebb;
    double fixed_weight = 0.5;  // HebbV3 only, in [0,1]

    void validate() const {
        require(k > 0, "adaptation: k must be positive");
        require(eps > 0.0, "adaptation: eps must be positive");
        require(lambda > 0.0, "adaptation: lambda must be positive");
        require(steps >= 1, "adaptation: steps must be >= 1");
        require(eta > 0.0, "adaptation: eta must be positive");
        require(beta >= 0.0 && beta < 1.0, "adaptation: beta must be in [0,1)");
        require(fixed_weight >= 0.0 && fixed_weight <= 1.0,
                "adaptation: fixed_weight must be in [0,1]");
    }
};

// Sparse Hebbian assignment: for each class present in the neighborhood,
// the class-averaged closeness-weighted neighbor representation.
inline AdaptationDelta hebbian_update(const Neighborhood& nbrs) {
    AdaptationDelta delta;
    if (nbrs.empty()) return delta;
    const std::size_t dim = nbrs.items.front().key.size();
    std::map<std::uint32_t, std::size_t> counts;
    for (const NeighborhoodItem& item : nbrs.items) ++counts[item.value];
    for (const NeighborhoodItem& item : nbrs.items)
        delta.accumulate(item.value, item.key, 1.0,
                         item.closeness / static_cast<double>(counts[item.value]), dim);
    return delta;
}

// Closeness-weighted log likelihood of the neighborhood.
inline double mbpa_loss(const OutputLayer& layer, const Neighborhood& nbrs) {
    require(!nbrs.empty(), "mbpa_loss: empty neighborhood");
    double total = 0.0;
    for (const NeighborhoodItem& item : nbrs.items) {
        const Vec p = layer.predict_probs(item.key);
        total += item.closeness * std::log(std::max(p[item.value],
                                                    std::numeric_limits<double>::min()));
    }
    return total / static_cast<double>(nbrs.size());
}

namespace detail {

// Loss as above but with a delta applied on top of the layer.
inline double mbpa_loss_adapted(const OutputLayer& layer, const AdaptationDelta& delta,
                                const Neighborhood& nbrs);

}  // namespace detail

// Gradient ascent on the weighted log likelihood, over W and b only.
// Probabilities are recomputed at the adapted parameters each step; the
// returned delta is the cumulative displacement.
inline AdaptationDelta mbpa_update(const OutputLayer& layer, const Neighborhood& nbrs,
                                   double lambda, int steps) {
    require(!nbrs.empty(), "mbpa_update: empty neighborhood");
    require(lambda > 0.0, "mbpa_update: lambda must be positive");
    require(steps >= 1, "mbpa_update: steps must be >= 1");

    const std::size_t n = layer.n_classes();
    const std::size_t dim = layer.dim();
    const double inv_count = 1.0 / static_cast<double>(nbrs.size());

    std::vector<Vec> w(n);
    Vec b(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        w[i] = layer.weight(i);
        b[i] = layer.bias(i);
    }

    std::vector<Vec> grad_w(n, Vec(dim, 0.0));
    Vec grad_b(n, 0.0);

    for (int step = 0; step < steps; ++step) {
        for (std::uint32_t i = 0; i < n; ++i) {
            std::fill(grad_w[i].begin(), grad_w[i].end(), 0.0);
            grad_b[i] = 0.0;
        }
        for (const NeighborhoodItem& item : nbrs.items) {
            require(item.value < n, "mbpa_update: neighbor class not registered");
            Vec z(n);
            for (std::uint32_t i = 0; i < n; ++i) z[i] = dot(w[i], item.key) + b[i];
            const Vec p = OutputLayer::softmax(std::move(z));
            for (std::uint32_t i = 0; i < n; ++i) {
                const double coeff =
                    item.closeness * ((i == item.value ? 1.0 : 0.0) - p[i]) * inv_count;
                for (std::size_t j = 0; j < dim; ++j) grad_w[i][j] += coeff * item.key[j];
                grad_b[i] += coeff;
            }
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) w[i][j] += lambda * grad_w[i][j];
            b[i] += lambda * grad_b[i];
        }
    }

    AdaptationDelta delta;
    for (std::uint32_t i = 0; i < n; ++i) {
        AdaptationDelta::ClassDelta cd{Vec(dim, 0.0), 0.0};
        const Vec& w0 = layer.weight(i);
        for (std::size_t j = 0; j < dim; ++j) cd.weight[j] = w[i][j] - w0[j];
        cd.bias = b[i] - layer.bias(i);
        delta.by_class.emplace(i, std::move(cd));
    }
    return delta;
}

// The two terms of the one-step class-i MbPA delta (unit step size): the
// contribution of neighbors labeled i, and of the rest. Their sum equals the
// class-i row of mbpa_update(lambda=1, steps=1).
inline std::pair<Vec, Vec> decompose_mbpa(const OutputLayer& layer, const Neighborhood& nbrs,
                                          std::uint32_t i) {
    const std::size_t dim = layer.dim();
    Vec same(dim, 0.0);
    Vec other(dim, 0.0);
    if (nbrs.empty()) return {same, other};
    const double inv_count = 1.0 / static_cast<double>(nbrs.size());
    for (const NeighborhoodItem& item : nbrs.items) {
        const Vec p = layer.predict_probs(item.key);
        if (item.value == i) {
            const double coeff = item.closeness * (1.0 - p[item.value]) * inv_count;
            for (std::size_t j = 0; j < dim; ++j) same[j] += coeff * item.key[j];
        } else {
            const double coeff = item.closeness * p[i] * inv_count;
            for (std::size_t j = 0; j < dim; ++j) other[j] -= coeff * item.key[j];
        }
    }
    return {same, other};
}

// Class-frequency interpolation weight E_i = (1-beta)/(1-beta^{n_i}); a
// never-seen class gets full Hebbian reliance.
inline double dynamic_weight(std::uint64_t n_i, double beta) {
    require(beta >= 0.0 && beta < 1.0, "dynamic_weight: beta must be in [0,1)");
    if (n_i == 0) return 1.0;
    if (beta == 0.0) return 1.0;
    return (1.0 - beta) / (1.0 - std::pow(beta, static_cast<double>(n_i)));
}

using ClassCountFn = std::function<std::uint64_t(std::uint32_t)>;

// Per-class interpolation of the MbPA delta over N and the eta-scaled Hebbian
// delta over N^new, weighted by E_i. Ablation modes select subsets or replace
// the dynamic weight.
inline AdaptationDelta mixed_update(const OutputLayer& layer, const Neighborhood& nbrs,
                                    const Neighborhood& n_new, const ClassCountFn& counts,
                                    const AdaptationConfig& cfg) {
    cfg.validate();
    AdaptationDelta result;
    if (nbrs.empty() || cfg.mode == AdaptMode::MixtureOnly) return result;
    const std::size_t dim = layer.dim();

    if (cfg.mode == AdaptMode::MbPAOnly) return mbpa_update(layer, nbrs, cfg.lambda, cfg.steps);

    if (cfg.mode == AdaptMode::HebbV1) {
        AdaptationDelta hebb = hebbian_update(n_new);
        for (const auto& [i, cd] : hebb.by_class)
            result.accumulate(i, cd.weight, cd.bias, cfg.eta, dim);
        return result;
    }

    const Neighborhood& hebb_source = cfg.mode == AdaptMode::HebbV2 ? nbrs : n_new;
    const AdaptationDelta mbpa = mbpa_update(layer, nbrs, cfg.lambda, cfg.steps);
    const AdaptationDelta hebb = hebbian_update(hebb_source);

    std::set<std::uint32_t> classes;
    for (const auto& [i, cd] : mbpa.by_class) classes.insert(i);
    for (const auto& [i, cd] : hebb.by_class) classes.insert(i);

    for (std::uint32_t i : classes) {
        const double e = cfg.mode == AdaptMode::HebbV3 ? cfg.fixed_weight
                                                       : dynamic_weight(counts(i), cfg.beta);
        if (auto it = mbpa.by_class.find(i); it != mbpa.by_class.end())
            result.accumulate(i, it->second.weight, it->second.bias, 1.0 - e, dim);
        if (auto it = hebb.by_class.find(i); it != hebb.by_class.end())
            result.accumulate(i, it->second.weight, it->second.bias, e * cfg.eta, dim);
    }
    return result;
}

// Softmax over (W + dW)^T h + (b + db); the layer itself is not mutated.
inline Vec adapted_predict(const OutputLayer& layer, const AdaptationDelta& delta,
                           const Vec& h) {
    Vec z = layer.logits(h);
    for (const auto& [i, cd] : delta.by_class) {
        require(i < layer.n_classes(), "adapted_predict: delta class not registered");
        z[i] += dot(cd.weight, h) + cd.bias;
    }
    return OutputLayer::softmax(std::move(z));
}

namespace detail {

inline double mbpa_loss_adapted(const OutputLayer& layer, const AdaptationDelta& delta,
                                const Neighborhood& nbrs) {
    double total = 0.0;
    for (const NeighborhoodItem& item : nbrs.items) {
        const Vec p = adapted_predict(layer, delta, item.key);
        total += item.closeness * std::log(std::max(p[item.value],
                                                    std::numeric_limits<double>::min()));
    }
    return total / static_cast<double>(nbrs.size());
}

}  // namespace detail

}  // namespace hebb
