#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hebb/adaptation.hpp"
#include "hebb/classifier.hpp"
#include "hebb/memory.hpp"

// Named invariant suites with independent oracles (central finite differences,
// brute-force sorting). Backs the `verify` subcommand and the acceptance run.

namespace hebb::verify {

struct CheckResult {
    std::string name;
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::string detail;  // first failure description

    bool passed() const { return failed == 0; }

    void fail(const std::string& d) {
        if (failed == 0) detail = d;
        ++failed;
    }
};

struct RandomInstance {
    OutputLayer layer;
    Neighborhood nbrs;
};

inline RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_dim = 16,
                                      std::size_t max_classes = 8,
                                      std::size_t max_neighbors = 20,
                                      bool nonnegative_features = false) {
    std::uniform_int_distribution<std::size_t> dim_pick(2, max_dim);
    std::uniform_int_distribution<std::size_t> class_pick(2, max_classes);
    std::uniform_int_distribution<std::size_t> nbr_pick(1, max_neighbors);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> closeness(0.05, 2.0);

    const std::size_t dim = dim_pick(rng);
    const std::size_t n = class_pick(rng);
    RandomInstance inst{OutputLayer(dim, n), {}};
    for (std::uint32_t i = 0; i < n; ++i) {
        for (double& w : inst.layer.weight(i)) w = normal(rng);
        inst.layer.bias(i) = normal(rng);
    }
    std::uniform_int_distribution<std::uint32_t> label_pick(0, static_cast<std::uint32_t>(n - 1));
    const std::size_t n_nbrs = nbr_pick(rng);
    for (std::size_t k = 0; k < n_nbrs; ++k) {
        NeighborhoodItem item;
        item.key.resize(dim);
        for (double& x : item.key) {
            x = normal(rng);
            if (nonnegative_features) x = std::abs(x);
        }
        item.value = label_pick(rng);
        item.closeness = closeness(rng);
        item.seq = k;
        inst.nbrs.items.push_back(std::move(item));
    }
    return inst;
}

// Central finite differences of the weighted log-likelihood w.r.t. every
// parameter. Independent of the analytic gradient path.
inline AdaptationDelta finite_difference_gradient(const OutputLayer& layer,
                                                  const Neighborhood& nbrs,
                                                  double step = 1e-6) {
    AdaptationDelta grad;
    const std::size_t n = layer.n_classes();
    const std::size_t dim = layer.dim();
    OutputLayer probe = layer;
    for (std::uint32_t i = 0; i < n; ++i) {
        AdaptationDelta::ClassDelta cd{Vec(dim, 0.0), 0.0};
        for (std::size_t j = 0; j < dim; ++j) {
            const double orig = probe.weight(i)[j];
            probe.weight(i)[j] = orig + step;
            const double up = mbpa_loss(probe, nbrs);
            probe.weight(i)[j] = orig - step;
            const double down = mbpa_loss(probe, nbrs);
            probe.weight(i)[j] = orig;
            cd.weight[j] = (up - down) / (2.0 * step);
        }
        const double orig = probe.bias(i);
        probe.bias(i) = orig + step;
        const double up = mbpa_loss(probe, nbrs);
        probe.bias(i) = orig - step;
        const double down = mbpa_loss(probe, nbrs);
        probe.bias(i) = orig;
        cd.bias = (up - down) / (2.0 * step);
        grad.by_class.emplace(i, std::move(cd));
    }
    return grad;
}

// One-step MbPA delta vs lambda x finite differences of the objective.
// `corrupt` is a test hook that perturbs the analytic side.
inline CheckResult check_gradient(std::size_t instances = 500, double tol = 1e-5,
                                  std::uint64_t seed = 2024, bool corrupt = false) {
    CheckResult res{"mbpa-gradient-vs-finite-differences"};
    std::mt19937_64 rng(seed);
    const double lambda = 0.7;
    for (std::size_t t = 0; t < instances; ++t) {
        RandomInstance inst = random_instance(rng);
        AdaptationDelta analytic = mbpa_update(inst.layer, inst.nbrs, lambda, 1);
        if (corrupt && !analytic.by_class.empty())
            analytic.by_class.begin()->second.bias += 1e-3;
        const AdaptationDelta fd = finite_difference_gradient(inst.layer, inst.nbrs);

        double num = 0.0, denom = 0.0;
        for (const auto& [i, cd] : analytic.by_class) {
            const auto& fd_cd = fd.by_class.at(i);
            for (std::size_t j = 0; j < cd.weight.size(); ++j) {
                const double want = lambda * fd_cd.weight[j];
                num += (cd.weight[j] - want) * (cd.weight[j] - want);
                denom += want * want;
            }
            const double want = lambda * fd_cd.bias;
            num += (cd.bias - want) * (cd.bias - want);
            denom += want * want;
        }
        ++res.checked;
        const double rel = std::sqrt(num) / std::max(std::sqrt(denom), 1e-12);
        if (!(rel < tol))
            res.fail("instance " + std::to_string(t) + ": relative error " +
                     std::to_string(rel));
    }
    return res;
}

// Sum of the two decomposition terms equals the one-step class delta.
inline CheckResult check_decomposition(std::size_t instances = 500, double tol = 1e-12,
                                       std::uint64_t seed = 777) {
    CheckResult res{"mbpa-decomposition-identity"};
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < instances; ++t) {
        RandomInstance inst = random_instance(rng);
        const AdaptationDelta one_step = mbpa_update(inst.layer, inst.nbrs, 1.0, 1);
        for (std::uint32_t i = 0; i < inst.layer.n_classes(); ++i) {
            const auto [same, other] = decompose_mbpa(inst.layer, inst.nbrs, i);
            const Vec& whole = one_step.by_class.at(i).weight;
            ++res.checked;
            for (std::size_t j = 0; j < whole.size(); ++j) {
                if (!(std::abs(same[j] + other[j] - whole[j]) <= tol)) {
                    res.fail("instance " + std::to_string(t) + " class " + std::to_string(i));
                    break;
                }
            }
        }
    }
    return res;
}

// With componentwise-nonnegative features, the same-label MbPA term is
// squeezed between zero and the Hebbian delta, componentwise; the norm
// inequality is strict when any neighbor probability is positive.
inline CheckResult check_magnitude_bound(std::size_t instances = 1000,
                                         std::uint64_t seed = 4242) {
    CheckResult res{"hebbian-magnitude-bound"};
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < instances; ++t) {
        RandomInstance inst = random_instance(rng, 16, 8, 20, /*nonnegative=*/true);
        const AdaptationDelta hebb = hebbian_update(inst.nbrs);
        for (const auto& [i, hebb_cd] : hebb.by_class) {
            const auto [same, other] = decompose_mbpa(inst.layer, inst.nbrs, i);
            ++res.checked;
            double same_norm2 = 0.0, hebb_norm2 = 0.0;
            bool componentwise_ok = true;
            for (std::size_t j = 0; j < same.size(); ++j) {
                if (same[j] < -1e-15 || same[j] > hebb_cd.weight[j] + 1e-15)
                    componentwise_ok = false;
                same_norm2 += same[j] * same[j];
                hebb_norm2 += hebb_cd.weight[j] * hebb_cd.weight[j];
            }
            if (!componentwise_ok) {
                res.fail("componentwise bound violated, instance " + std::to_string(t));
                continue;
            }
            // Class probabilities are strictly positive under softmax, so the
            // norm inequality must be strict whenever the Hebbian delta is
            // nonzero.
            if (hebb_norm2 > 1e-20 && !(same_norm2 < hebb_norm2))
                res.fail("norm inequality not strict, instance " + std::to_string(t));
        }
    }
    return res;
}

// E_1 = 1 exactly; strictly decreasing in n_i; tail approaches 1 - beta.
inline CheckResult check_dynamic_weight() {
    CheckResult res{"dynamic-weight-law"};
    for (double beta : {0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        ++res.checked;
        if (dynamic_weight(1, beta) != 1.0) {
            res.fail("E_1 != 1 at beta " + std::to_string(beta));
            continue;
        }
        double prev = dynamic_weight(1, beta);
        bool monotone = true;
        for (std::uint64_t n_i = 2; n_i <= 1000; ++n_i) {
            const double e = dynamic_weight(n_i, beta);
            // Strict decrease whenever the sequence is still resolvable in
            // double precision; once beta^n underflows, E sits exactly at its
            // limit 1 - beta and only non-increase can be asserted.
            const bool resolvable = prev - (1.0 - beta) > 1e-12;
            if (resolvable ? !(e < prev) : !(e <= prev)) monotone = false;
            prev = e;
        }
        if (!monotone) res.fail("not strictly decreasing at beta " + std::to_string(beta));
        if (std::abs(dynamic_weight(1000, beta) - (1.0 - beta)) >= 1e-3)
            res.fail("tail limit off at beta " + std::to_string(beta));
    }
    return res;
}

// retrieve_knn vs a full sort with the same tie-break.
inline CheckResult check_knn_oracle(std::size_t trials = 200, std::uint64_t seed = 99) {
    CheckResult res{"knn-oracle-equivalence"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim_pick(1, 32);
    std::uniform_int_distribution<std::size_t> count_pick(1, 2000);
    std::uniform_int_distribution<int> coord_pick(-3, 3);  // integer grid forces ties
    std::uniform_int_distribution<std::uint32_t> label_pick(0, 9);

    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t dim = dim_pick(rng);
        const std::size_t count = count_pick(rng);
        EpisodicMemory mem(dim);
        for (std::size_t e = 0; e < count; ++e) {
            Vec key(dim);
            for (double& x : key) x = coord_pick(rng);
            mem.write(key, label_pick(rng));
        }
        Vec query(dim);
        for (double& x : query) x = coord_pick(rng);
        std::uniform_int_distribution<std::size_t> k_pick(1, count + 3);
        const std::size_t k = k_pick(rng);
        const double eps = 1e-3;

        struct Ranked {
            double d2;
            std::uint64_t seq;
        };
        std::vector<Ranked> ranked;
        for (const MemoryEntry& e : mem.entries())
            ranked.push_back({squared_distance(query, e.key), e.seq});
        std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.d2 != b.d2) return a.d2 < b.d2;
            return a.seq < b.seq;
        });

        const Neighborhood nbrs = mem.retrieve_knn(query, k, eps);
        ++res.checked;
        const std::size_t expected = std::min(k, count);
        if (nbrs.size() != expected) {
            res.fail("size mismatch, trial " + std::to_string(t));
            continue;
        }
        for (std::size_t r = 0; r < expected; ++r) {
            if (nbrs.items[r].seq != ranked[r].seq ||
                std::abs(nbrs.items[r].closeness - 1.0 / (eps + ranked[r].d2)) > 0) {
                res.fail("order/closeness mismatch, trial " + std::to_string(t));
                break;
            }
        }
    }
    return res;
}

inline std::vector<CheckResult> run_all(bool corrupt_gradient = false) {
    return {check_gradient(500, 1e-5, 2024, corrupt_gradient), check_decomposition(),
            check_magnitude_bound(), check_dynamic_weight(), check_knn_oracle()};
}

}  // namespace hebb::verify
