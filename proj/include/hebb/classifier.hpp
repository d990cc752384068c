#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "hebb/core.hpp"
#include "hebb/snapshot_io.hpp"

namespace hebb {

struct LabeledExample {
    Vec x;
    std::uint32_t y = 0;
};

using Dataset = std::vector<LabeledExample>;

// Frozen feature extractor g: either the identity or a seeded random
// projection followed by a rectifier (outputs componentwise >= 0).
class FeatureExtractor {
  public:
    static FeatureExtractor identity(std::size_t dim) {
        FeatureExtractor fe;
        fe.input_dim_ = fe.output_dim_ = dim;
        fe.is_identity_ = true;
        return fe;
    }

    static FeatureExtractor random_projection(std::size_t input_dim, std::size_t output_dim,
                                              std::uint64_t seed) {
        require(input_dim > 0 && output_dim > 0, "projection dimensions must be positive");
        FeatureExtractor fe;
        fe.input_dim_ = input_dim;
        fe.output_dim_ = output_dim;
        fe.is_identity_ = false;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
        fe.proj_.assign(output_dim, Vec(input_dim));
        fe.proj_bias_.assign(output_dim, 0.0);
        for (std::size_t r = 0; r < output_dim; ++r) {
            for (std::size_t c = 0; c < input_dim; ++c) fe.proj_[r][c] = scale * normal(rng);
            fe.proj_bias_[r] = scale * normal(rng);
        }
        return fe;
    }

    // Rectified projection with explicit parameters.
    static FeatureExtractor projection(std::vector<Vec> proj, Vec bias) {
        require(!proj.empty() && !proj[0].empty(), "projection must be non-empty");
        require(proj.size() == bias.size(), "projection/bias size mismatch");
        FeatureExtractor fe;
        fe.input_dim_ = proj[0].size();
        fe.output_dim_ = proj.size();
        fe.is_identity_ = false;
        for (const Vec& row : proj)
            require(row.size() == fe.input_dim_, "ragged projection matrix");
        fe.proj_ = std::move(proj);
        fe.proj_bias_ = std::move(bias);
        return fe;
    }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    bool is_identity() const { return is_identity_; }

    Vec extract(const Vec& x) const {
        require(x.size() == input_dim_, "extract: input dimension mismatch");
        if (is_identity_) return x;
        Vec h(output_dim_);
        for (std::size_t r = 0; r < output_dim_; ++r)
            h[r] = std::max(0.0, dot(proj_[r], x) + proj_bias_[r]);
        return h;
    }

  private:
    FeatureExtractor() = default;

    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    bool is_identity_ = true;
    std::vector<Vec> proj_;  // row r = projection for output component r
    Vec proj_bias_;
};

// Linear-softmax output layer: column w_i per class plus bias b_i.
class OutputLayer {
  public:
    OutputLayer(std::size_t dim, std::size_t n_classes)
        : dim_(dim), weights_(n_classes, Vec(dim, 0.0)), bias_(n_classes, 0.0) {
        require(dim > 0, "layer dimension must be positive");
    }

    std::size_t dim() const { return dim_; }
    std::size_t n_classes() const { return weights_.size(); }

    const Vec& weight(std::uint32_t i) const { return weights_[i]; }
    Vec& weight(std::uint32_t i) { return weights_[i]; }
    double bias(std::uint32_t i) const { return bias_[i]; }
    double& bias(std::uint32_t i) { return bias_[i]; }

    Vec logits(const Vec& h) const {
        require(h.size() == dim_, "logits: representation dimension mismatch");
        Vec z(n_classes());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = dot(weights_[i], h) + bias_[i];
        return z;
    }

    Vec predict_probs(const Vec& h) const { return softmax(logits(h)); }

    static Vec softmax(Vec z) {
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double& zi : z) {
            zi = std::exp(zi - zmax);
            denom += zi;
        }
        for (double& zi : z) zi /= denom;
        return z;
    }

    // Appends zero-initialized columns up to new_class_id; existing columns
    // are untouched so old logits are unchanged up to renormalization.
    void register_class(std::uint32_t new_class_id) {
        require(new_class_id >= n_classes(), "register_class: class already registered");
        weights_.resize(new_class_id + 1, Vec(dim_, 0.0));
        bias_.resize(new_class_id + 1, 0.0);
    }

    std::vector<std::uint8_t> snapshot() const {
        io::Writer w;
        w.magic("HEBL");
        w.u16(kFormatVersion);
        w.u32(static_cast<std::uint32_t>(dim_));
        w.u32(static_cast<std::uint32_t>(n_classes()));
        for (std::size_t i = 0; i < n_classes(); ++i) {
            for (double x : weights_[i]) w.f64(x);
            w.f64(bias_[i]);
        }
        return w.bytes();
    }

    static OutputLayer restore(const std::vector<std::uint8_t>& bytes) {
        io::Reader r(bytes);
        r.magic("HEBL");
        const std::uint16_t version = r.u16();
        if (version != kFormatVersion)
            throw io::DecodeError("unsupported layer snapshot version " +
                                  std::to_string(version));
        const std::uint32_t dim = r.u32();
        const std::uint32_t n = r.u32();
        if (dim == 0) throw io::DecodeError("zero dimension in layer snapshot");
        OutputLayer layer(dim, n);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = 0; j < dim; ++j) layer.weights_[i][j] = r.f64();
            layer.bias_[i] = r.f64();
        }
        if (!r.at_end()) throw io::DecodeError("trailing bytes after layer parameters");
        return layer;
    }

    bool operator==(const OutputLayer&) const = default;

  private:
    static constexpr std::uint16_t kFormatVersion = 1;

    std::size_t dim_;
    std::vector<Vec> weights_;
    Vec bias_;
};

struct TrainOptions {
    std::size_t epochs = 10;
    double lr = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

// Mini-batch SGD on softmax cross-entropy. Deterministic given the seed.
inline void train(const FeatureExtractor& fe, OutputLayer& layer, const Dataset& data,
                  const TrainOptions& opts) {
    require(!data.empty(), "train: empty dataset");
    require(opts.lr > 0.0, "train: learning rate must be positive");
    require(opts.batch_size > 0, "train: batch size must be positive");

    std::vector<Vec> features;
    features.reserve(data.size());
    for (const LabeledExample& ex : data) {
        require(ex.y < layer.n_classes(), "train: label outside registered classes");
        features.push_back(fe.extract(ex.x));
    }

    const std::size_t n = layer.n_classes();
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opts.seed);

    std::vector<Vec> grad_w(n, Vec(layer.dim(), 0.0));
    Vec grad_b(n, 0.0);

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t end = std::min(start + opts.batch_size, order.size());
            for (std::uint32_t i = 0; i < n; ++i) {
                std::fill(grad_w[i].begin(), grad_w[i].end(), 0.0);
                grad_b[i] = 0.0;
            }
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t idx = order[b];
                const Vec& h = features[idx];
                const Vec p = layer.predict_probs(h);
                for (std::uint32_t i = 0; i < n; ++i) {
                    const double coeff = p[i] - (i == data[idx].y ? 1.0 : 0.0);
                    for (std::size_t j = 0; j < h.size(); ++j) grad_w[i][j] += coeff * h[j];
                    grad_b[i] += coeff;
                }
            }
            const double step = opts.lr / static_cast<double>(end - start);
            for (std::uint32_t i = 0; i < n; ++i) {
                Vec& w = layer.weight(i);
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * grad_w[i][j];
                layer.bias(i) -= step * grad_b[i];
            }
        }
    }
}

inline double mean_cross_entropy(const FeatureExtractor& fe, const OutputLayer& layer,
                                 const Dataset& data) {
    double loss = 0.0;
    for (const LabeledExample& ex : data) {
        const Vec p = layer.predict_probs(fe.extract(ex.x));
        loss -= std::log(std::max(p[ex.y], std::numeric_limits<double>::min()));
    }
    return loss / static_cast<double>(data.size());
}

inline double accuracy(const FeatureExtractor& fe, const OutputLayer& layer,
                       const Dataset& data) {
    std::size_t correct = 0;
    for (const LabeledExample& ex : data) {
        const Vec p = layer.predict_probs(fe.extract(ex.x));
        const auto arg = std::max_element(p.begin(), p.end()) - p.begin();
        if (static_cast<std::uint32_t>(arg) == ex.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace hebb
