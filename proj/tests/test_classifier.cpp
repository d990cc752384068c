#include <cmath>
#include <random>

#include "doctest.h"
#include "hebb/classifier.hpp"
#include "hebb/harness.hpp"

using namespace hebb;

TEST_CASE("identity extractor passes input through") {
    const FeatureExtractor fe = FeatureExtractor::identity(2);
    CHECK(fe.extract({1.0, 2.0}) == Vec{1.0, 2.0});
    CHECK_THROWS_AS(static_cast<void>(fe.extract({1.0})), std::invalid_argument);
}

TEST_CASE("random projection is seeded, deterministic, nonnegative") {
    const FeatureExtractor a = FeatureExtractor::random_projection(4, 6, 42);
    const FeatureExtractor b = FeatureExtractor::random_projection(4, 6, 42);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        Vec x(4);
        for (double& v : x) v = noise(rng);
        const Vec ha = a.extract(x);
        CHECK(ha == b.extract(x));
        for (double v : ha) CHECK(v >= 0.0);
    }
}

TEST_CASE("explicit projection rectifies negative components to zero") {
    const FeatureExtractor fe =
        FeatureExtractor::projection({{0.0, 0.0}, {0.0, 0.0}}, {1.0, -1.0});
    CHECK(fe.extract({5.0, -3.0}) == Vec{1.0, 0.0});
    CHECK_THROWS_AS(FeatureExtractor::projection({{1.0}, {1.0, 2.0}}, {0.0, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("zero-weight layer predicts uniform") {
    const OutputLayer layer(3, 4);
    const Vec p = layer.predict_probs({1.0, -2.0, 0.5});
    for (double pi : p) CHECK(pi == doctest::Approx(0.25));
}

TEST_CASE("bias-only softmax matches hand evaluation") {
    OutputLayer layer(1, 2);
    layer.bias(0) = std::log(2.0);
    const Vec p = layer.predict_probs({0.0});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is invariant under constant logit shifts") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        Vec z(5);
        for (double& v : z) v = noise(rng);
        Vec shifted = z;
        for (double& v : shifted) v += 137.0;
        const Vec a = OutputLayer::softmax(z);
        const Vec b = OutputLayer::softmax(shifted);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-12);
            CHECK(a[i] >= 0.0);
            sum += a[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("training separates two Gaussian blobs") {
    GaussianBlobs blobs;
    blobs.n_classes = 2;
    blobs.d_in = 2;
    blobs.per_class = 100;
    blobs.spread = 0.5;
    blobs.seed = 31;
    const Dataset data = sample_blobs(blobs, 32);

    const FeatureExtractor fe = FeatureExtractor::identity(2);
    OutputLayer layer(2, 2);
    train(fe, layer, data, {.epochs = 50, .lr = 0.1, .batch_size = 16, .seed = 1});
    CHECK(accuracy(fe, layer, data) >= 0.95);
    CHECK(std::isfinite(mean_cross_entropy(fe, layer, data)));
}

TEST_CASE("zero epochs leaves the layer unchanged") {
    const FeatureExtractor fe = FeatureExtractor::identity(2);
    OutputLayer layer(2, 2);
    layer.weight(0) = {0.5, -0.5};
    const OutputLayer before = layer;
    train(fe, layer, {{{1.0, 0.0}, 0}}, {.epochs = 0, .lr = 0.1, .batch_size = 4, .seed = 0});
    CHECK(layer == before);
}

TEST_CASE("train rejects bad arguments") {
    const FeatureExtractor fe = FeatureExtractor::identity(1);
    OutputLayer layer(1, 2);
    CHECK_THROWS_AS(train(fe, layer, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(train(fe, layer, {{{1.0}, 0}}, {.epochs = 1, .lr = 0.0}),
                    std::invalid_argument);
}

TEST_CASE("trainer gradient matches central finite differences") {
    std::mt19937_64 rng(55);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> label(0, 2);
    const FeatureExtractor fe = FeatureExtractor::identity(3);

    for (int trial = 0; trial < 20; ++trial) {
        OutputLayer layer(3, 3);
        for (std::uint32_t i = 0; i < 3; ++i) {
            for (double& w : layer.weight(i)) w = noise(rng);
            layer.bias(i) = noise(rng);
        }
        Dataset data;
        for (int s = 0; s < 6; ++s)
            data.push_back({{noise(rng), noise(rng), noise(rng)}, label(rng)});

        // analytic gradient: one full-batch step with tiny lr
        const double lr = 1e-8;
        OutputLayer stepped = layer;
        train(fe, stepped, data, {.epochs = 1, .lr = lr, .batch_size = data.size(), .seed = 0});

        const double step = 1e-6;
        double num = 0.0, denom = 0.0;
        OutputLayer probe = layer;
        for (std::uint32_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double orig = probe.weight(i)[j];
                probe.weight(i)[j] = orig + step;
                const double up = mean_cross_entropy(fe, probe, data);
                probe.weight(i)[j] = orig - step;
                const double down = mean_cross_entropy(fe, probe, data);
                probe.weight(i)[j] = orig;
                const double fd = (up - down) / (2.0 * step);
                const double analytic = (layer.weight(i)[j] - stepped.weight(i)[j]) / lr;
                num += (analytic - fd) * (analytic - fd);
                denom += fd * fd;
            }
        }
        CHECK(std::sqrt(num) / std::max(std::sqrt(denom), 1e-12) < 1e-5);
    }
}

TEST_CASE("register_class appends a zero column") {
    OutputLayer layer(2, 3);
    layer.weight(1) = {0.3, -0.7};
    layer.bias(2) = 0.9;
    const OutputLayer before = layer;

    layer.register_class(3);
    CHECK(layer.n_classes() == 4);
    for (std::uint32_t i = 0; i < 3; ++i) {
        CHECK(layer.weight(i) == before.weight(i));
        CHECK(layer.bias(i) == before.bias(i));
    }
    CHECK(layer.weight(3) == Vec{0.0, 0.0});
    CHECK(layer.bias(3) == 0.0);

    // new logit is zero, so old probabilities only renormalize
    const Vec h{0.4, -0.2};
    const Vec old_p = before.predict_probs(h);
    const Vec new_p = layer.predict_probs(h);
    for (std::uint32_t i = 0; i < 3; ++i)
        CHECK(new_p[i] / new_p[0] == doctest::Approx(old_p[i] / old_p[0]).epsilon(1e-12));

    CHECK_THROWS_AS(layer.register_class(2), std::invalid_argument);
}

TEST_CASE("layer snapshot round-trips") {
    OutputLayer layer(2, 3);
    layer.weight(0) = {1.25, -0.5};
    layer.bias(1) = 0.125;
    CHECK(OutputLayer::restore(layer.snapshot()) == layer);

    auto bytes = layer.snapshot();
    bytes[1] = 'X';
    CHECK_THROWS_AS(static_cast<void>(OutputLayer::restore(bytes)), io::DecodeError);
}
