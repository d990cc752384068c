#pragma once

#include <algorithm>
#include <cstdint>

#include "hebb/classifier.hpp"
#include "hebb/core.hpp"
#include "hebb/memory.hpp"

namespace hebb {

struct MixtureConfig {
    double gamma = 0.1;  // weight of the non-parametric term
    double theta = 1.0;  // flatness of the non-parametric scores
    bool normalize_terms = false;  // self-normalize each term before mixing

    void validate() const {
        require(gamma >= 0.0 && gamma <= 1.0, "mixture: gamma must be in [0,1]");
        require(theta > 0.0, "mixture: theta must be positive");
    }
};

// Convex combination of the parametric softmax score and a kernelized
// non-parametric score over the neighborhood. Each exponential family is
// max-shifted independently before mixing.
inline Vec mixture_predict(const OutputLayer& layer, const Neighborhood& nbrs, const Vec& h,
                           const MixtureConfig& cfg) {
    cfg.validate();
    const std::size_t n = layer.n_classes();

    Vec z = layer.logits(h);
    const double zmax = *std::max_element(z.begin(), z.end());
    Vec parametric(n);
    double parametric_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        parametric[i] = std::exp(z[i] - zmax);
        parametric_sum += parametric[i];
    }

    Vec nonparametric(n, 0.0);
    double nonparametric_sum = 0.0;
    if (!nbrs.empty()) {
        double smax = -std::numeric_limits<double>::infinity();
        for (const NeighborhoodItem& item : nbrs.items)
            smax = std::max(smax, cfg.theta * dot(item.key, h));
        for (const NeighborhoodItem& item : nbrs.items) {
            require(item.value < n, "mixture_predict: neighbor class not registered");
            nonparametric[item.value] += std::exp(cfg.theta * dot(item.key, h) - smax);
        }
        for (double s : nonparametric) nonparametric_sum += s;
    }

    Vec scores(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double para = parametric[i];
        double nonpara = nonparametric[i];
        if (cfg.normalize_terms) {
            para /= parametric_sum;
            if (nonparametric_sum > 0.0) nonpara /= nonparametric_sum;
        }
        scores[i] = (1.0 - cfg.gamma) * para + cfg.gamma * nonpara;
        total += scores[i];
    }
    if (total <= 0.0) {
        // gamma = 1 with an empty neighborhood: fall back to the parametric
        // distribution.
        for (std::size_t i = 0; i < n; ++i) scores[i] = parametric[i] / parametric_sum;
        return scores;
    }
    for (double& s : scores) s /= total;
    return scores;
}

// Plain fine-tuning of the classifier; the memory component is untouched.
inline void parametric_finetune(const FeatureExtractor& fe, OutputLayer& layer,
                                const Dataset& data, const TrainOptions& opts) {
    train(fe, layer, data, opts);
}

}  // namespace hebb
