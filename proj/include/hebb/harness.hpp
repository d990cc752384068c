#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hebb/adaptation.hpp"
#include "hebb/baselines.hpp"
#include "hebb/classifier.hpp"
#include "hebb/core.hpp"
#include "hebb/memory.hpp"

namespace hebb {

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct GaussianBlobs {
    std::size_t n_classes = 10;
    std::size_t d_in = 16;
    std::size_t per_class = 100;
    double spread = 0.6;
    std::uint64_t seed = 1;

    void validate() const {
        require(n_classes > 0 && d_in > 0 && per_class > 0, "blobs: counts must be positive");
        require(spread > 0.0, "blobs: spread must be positive");
    }
};

struct PermutedFamily {
    GaussianBlobs base;
    std::size_t n_tasks = 5;
    std::uint64_t permutation_seed = 7;
};

inline std::vector<Vec> blob_means(const GaussianBlobs& g) {
    std::mt19937_64 rng(g.seed);
    std::normal_distribution<double> noise(0.0, 2.5);
    std::vector<Vec> means(g.n_classes, Vec(g.d_in));
    for (Vec& m : means)
        for (double& x : m) x = noise(rng);
    return means;
}

// Samples counts[c] points per class around the class means. The noise seed is
// independent of the mean seed so train/test splits share cluster geometry.
inline Dataset sample_blobs(const GaussianBlobs& g, std::uint64_t noise_seed,
                            const std::vector<std::size_t>& counts) {
    g.validate();
    const std::vector<Vec> means = blob_means(g);
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, g.spread);
    Dataset data;
    for (std::uint32_t c = 0; c < g.n_classes; ++c) {
        for (std::size_t s = 0; s < counts[c]; ++s) {
            Vec x(g.d_in);
            for (std::size_t j = 0; j < g.d_in; ++j) x[j] = means[c][j] + noise(rng);
            data.push_back(LabeledExample{std::move(x), c});
        }
    }
    return data;
}

inline Dataset sample_blobs(const GaussianBlobs& g, std::uint64_t noise_seed) {
    return sample_blobs(g, noise_seed, std::vector<std::size_t>(g.n_classes, g.per_class));
}

// Coordinate permutations, one per task; task 0 is the identity.
inline std::vector<std::vector<std::size_t>> make_permutations(std::size_t d,
                                                               std::size_t n_tasks,
                                                               std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> perms(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
        perms[t].resize(d);
        std::iota(perms[t].begin(), perms[t].end(), 0);
        if (t > 0) {
            std::mt19937_64 rng(seed + t);
            std::shuffle(perms[t].begin(), perms[t].end(), rng);
        }
    }
    return perms;
}

inline Dataset apply_permutation(const Dataset& data, const std::vector<std::size_t>& perm) {
    Dataset out;
    out.reserve(data.size());
    for (const LabeledExample& ex : data) {
        Vec x(ex.x.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = ex.x[perm[j]];
        out.push_back(LabeledExample{std::move(x), ex.y});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

enum class ScenarioKind { Continual, Incremental, Online };

enum class Method { Parametric, Mixture, MbPA, Hebb, HebbV1, HebbV2, HebbV3 };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Parametric: return "parametric";
        case Method::Mixture: return "mixture";
        case Method::MbPA: return "mbpa";
        case Method::Hebb: return "hebb";
        case Method::HebbV1: return "hebb-v1";
        case Method::HebbV2: return "hebb-v2";
        case Method::HebbV3: return "hebb-v3";
    }
    return "?";
}

inline std::optional<Method> method_from_name(const std::string& s) {
    for (Method m : {Method::Parametric, Method::Mixture, Method::MbPA, Method::Hebb,
                     Method::HebbV1, Method::HebbV2, Method::HebbV3})
        if (s == method_name(m)) return m;
    return std::nullopt;
}

inline AdaptMode method_adapt_mode(Method m) {
    switch (m) {
        case Method::MbPA: return AdaptMode::MbPAOnly;
        case Method::Hebb: return AdaptMode::Hebb;
        case Method::HebbV1: return AdaptMode::HebbV1;
        case Method::HebbV2: return AdaptMode::HebbV2;
        case Method::HebbV3: return AdaptMode::HebbV3;
        case Method::Mixture: return AdaptMode::MixtureOnly;
        default: return AdaptMode::MixtureOnly;
    }
}

inline bool method_uses_memory(Method m) { return m != Method::Parametric; }

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::Online;
    std::string name = "online";

    GaussianBlobs task;
    double imbalance_ratio = 1.0;  // major:minor sample ratio on the new-class half
    std::size_t test_per_class = 30;

    // Continual
    std::size_t n_tasks = 5;
    std::size_t epochs_per_task = 20;
    std::uint64_t permutation_seed = 7;

    // Incremental / online
    std::set<std::uint32_t> pretrain_classes = {0, 1, 2, 3, 4};
    std::size_t incremental_epochs = 10;
    std::size_t eval_every = 1;
    std::size_t finetune_cadence = 100;
    bool memory_write = true;

    Method method = Method::Hebb;
    AdaptationConfig adaptation;
    MixtureConfig mixture;
    CapacityPolicy capacity = CapacityPolicy::unbounded();

    TrainOptions pretrain_opts{.epochs = 40, .lr = 0.1, .batch_size = 32, .seed = 0};
    TrainOptions finetune_opts{.epochs = 1, .lr = 0.05, .batch_size = 32, .seed = 0};

    bool random_projection = false;  // identity extractor otherwise
    std::size_t feature_dim = 16;

    std::vector<std::uint64_t> seeds = {1, 2, 3};

    void validate() const {
        task.validate();
        adaptation.validate();
        mixture.validate();
        require(imbalance_ratio >= 1.0, "scenario: imbalance ratio must be >= 1");
        require(!seeds.empty(), "scenario: at least one seed required");
        require(test_per_class > 0, "scenario: test_per_class must be positive");
        if (kind == ScenarioKind::Continual) {
            require(n_tasks > 0, "scenario: n_tasks must be positive");
            require(epochs_per_task > 0, "scenario: epochs_per_task must be positive");
        } else {
            require(!pretrain_classes.empty(), "scenario: pretrain classes required");
            for (std::uint32_t c : pretrain_classes)
                require(c < task.n_classes, "scenario: pretrain class outside label universe");
            if (kind == ScenarioKind::Online)
                require(finetune_cadence > 0, "scenario: finetune_cadence must be positive");
            if (kind == ScenarioKind::Incremental)
                require(eval_every > 0 && incremental_epochs > 0,
                        "scenario: incremental epoch settings must be positive");
        }
    }
};

struct EvalPoint {
    double position = 0.0;
    double acc_overall = 0.0;
    std::optional<double> acc_new;
    std::optional<double> acc_old;
    std::vector<double> per_task;  // continual only
};

struct RunRecord {
    std::string scenario;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<EvalPoint> points;
    std::size_t unadapted_predictions = 0;  // empty-memory fallbacks
};

// ---------------------------------------------------------------------------
// Scenario engine
// ---------------------------------------------------------------------------

struct ScenarioState {
    FeatureExtractor fe;
    OutputLayer layer;
    EpisodicMemory mem;
    std::set<std::uint32_t> pretrain_classes;
    std::size_t unadapted = 0;
};

namespace detail {

inline Vec predict_one(ScenarioState& st, const ScenarioConfig& cfg, const Vec& h) {
    if (cfg.method == Method::Parametric || st.mem.empty()) {
        if (cfg.method != Method::Parametric) ++st.unadapted;
        return st.layer.predict_probs(h);
    }
    const Neighborhood nbrs = st.mem.retrieve_knn(h, cfg.adaptation.k, cfg.adaptation.eps);
    if (cfg.method == Method::Mixture) return mixture_predict(st.layer, nbrs, h, cfg.mixture);

    AdaptationConfig acfg = cfg.adaptation;
    acfg.mode = method_adapt_mode(cfg.method);
    const Neighborhood n_new = select_new(nbrs, st.pretrain_classes);
    const AdaptationDelta delta =
        mixed_update(st.layer, nbrs, n_new,
                     [&st](std::uint32_t i) { return st.mem.class_count(i); }, acfg);
    return adapted_predict(st.layer, delta, h);
}

inline std::uint32_t argmax(const Vec& p) {
    return static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct SplitCounter {
    std::size_t total = 0, correct = 0;
    std::size_t new_total = 0, new_correct = 0;
    std::size_t old_total = 0, old_correct = 0;

    void add(bool is_new, bool hit) {
        ++total;
        correct += hit;
        if (is_new) {
            ++new_total;
            new_correct += hit;
        } else {
            ++old_total;
            old_correct += hit;
        }
    }

    EvalPoint to_point(double position) const {
        EvalPoint p;
        p.position = position;
        p.acc_overall = total ? static_cast<double>(correct) / total : 0.0;
        if (new_total) p.acc_new = static_cast<double>(new_correct) / new_total;
        if (old_total) p.acc_old = static_cast<double>(old_correct) / old_total;
        return p;
    }
};

inline void write_dataset_to_memory(ScenarioState& st, const Dataset& data) {
    for (const LabeledExample& ex : data) st.mem.write(st.fe.extract(ex.x), ex.y);
}

inline std::vector<std::size_t> incremental_counts(const ScenarioConfig& cfg) {
    // Balanced per-class counts, except the later half of the new classes is
    // shrunk by the imbalance ratio.
    std::vector<std::size_t> counts(cfg.task.n_classes, cfg.task.per_class);
    if (cfg.imbalance_ratio > 1.0) {
        std::vector<std::uint32_t> new_classes;
        for (std::uint32_t c = 0; c < cfg.task.n_classes; ++c)
            if (!cfg.pretrain_classes.contains(c)) new_classes.push_back(c);
        for (std::size_t i = new_classes.size() / 2; i < new_classes.size(); ++i)
            counts[new_classes[i]] = std::max<std::size_t>(
                1, static_cast<std::size_t>(cfg.task.per_class / cfg.imbalance_ratio));
    }
    return counts;
}

}  // namespace detail

// Pre-trains the classifier on the pretrain classes, then stores each training
// pair's representation and label in memory exactly once.
inline ScenarioState run_training_phase(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + seed * 1000003;

    std::vector<std::size_t> counts(blobs.n_classes, 0);
    for (std::uint32_t c : cfg.pretrain_classes) counts[c] = blobs.per_class;
    Dataset pretrain = sample_blobs(blobs, blobs.seed + 11, counts);

    const std::size_t d_in = blobs.d_in;
    FeatureExtractor fe = cfg.random_projection
                              ? FeatureExtractor::random_projection(d_in, cfg.feature_dim,
                                                                    blobs.seed + 17)
                              : FeatureExtractor::identity(d_in);
    const std::uint32_t max_pretrain = *cfg.pretrain_classes.rbegin();
    OutputLayer layer(fe.output_dim(), max_pretrain + 1);

    TrainOptions opts = cfg.pretrain_opts;
    opts.seed = seed;
    train(fe, layer, pretrain, opts);

    ScenarioState st{std::move(fe), std::move(layer),
                     EpisodicMemory(cfg.random_projection ? cfg.feature_dim : d_in,
                                    cfg.capacity),
                     cfg.pretrain_classes};
    detail::write_dataset_to_memory(st, pretrain);
    return st;
}

// One pass of Algorithm-style inference: adapt transiently, predict, then (in
// online mode) reveal the label, register unseen classes, and update memory.
inline std::uint32_t run_inference_step(const Vec& x, std::uint32_t y_true, ScenarioState& st,
                                        const ScenarioConfig& cfg) {
    const Vec h = st.fe.extract(x);
    const std::uint32_t pred = detail::argmax(detail::predict_one(st, cfg, h));
    if (cfg.kind == ScenarioKind::Online) {
        if (y_true >= st.layer.n_classes()) st.layer.register_class(y_true);
        if (cfg.memory_write && method_uses_memory(cfg.method)) st.mem.write(h, y_true);
    }
    return pred;
}

namespace detail {

inline RunRecord run_continual(const ScenarioConfig& cfg, std::uint64_t seed) {
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + seed * 1000003;

    const auto perms = make_permutations(blobs.d_in, cfg.n_tasks, cfg.permutation_seed + seed);
    Dataset base_train = sample_blobs(blobs, blobs.seed + 11);
    GaussianBlobs test_blobs = blobs;
    test_blobs.per_class = cfg.test_per_class;
    Dataset base_test = sample_blobs(test_blobs, blobs.seed + 29);

    ScenarioState st{
        cfg.random_projection
            ? FeatureExtractor::random_projection(blobs.d_in, cfg.feature_dim, blobs.seed + 17)
            : FeatureExtractor::identity(blobs.d_in),
        OutputLayer(cfg.random_projection ? cfg.feature_dim : blobs.d_in, blobs.n_classes),
        EpisodicMemory(cfg.random_projection ? cfg.feature_dim : blobs.d_in, cfg.capacity),
        {}};  // no pretrain set: Hebbian update covers all neighbors

    RunRecord rec{cfg.name, method_name(cfg.method), seed, {}, 0};
    std::vector<Dataset> task_tests;

    for (std::size_t t = 0; t < cfg.n_tasks; ++t) {
        Dataset task_train = apply_permutation(base_train, perms[t]);
        task_tests.push_back(apply_permutation(base_test, perms[t]));

        TrainOptions opts = cfg.pretrain_opts;
        opts.epochs = cfg.epochs_per_task;
        opts.seed = seed * 100 + t;
        train(st.fe, st.layer, task_train, opts);
        if (method_uses_memory(cfg.method)) write_dataset_to_memory(st, task_train);

        EvalPoint point;
        point.position = static_cast<double>(t + 1);
        double acc_sum = 0.0;
        for (const Dataset& test : task_tests) {
            std::size_t hits = 0;
            for (const LabeledExample& ex : test) {
                const Vec h = st.fe.extract(ex.x);
                hits += argmax(predict_one(st, cfg, h)) == ex.y;
            }
            const double acc = static_cast<double>(hits) / test.size();
            point.per_task.push_back(acc);
            acc_sum += acc;
        }
        point.acc_overall = acc_sum / task_tests.size();
        rec.points.push_back(std::move(point));
    }
    rec.unadapted_predictions = st.unadapted;
    return rec;
}

inline RunRecord run_incremental(const ScenarioConfig& cfg, std::uint64_t seed) {
    ScenarioState st = run_training_phase(cfg, seed);
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + seed * 1000003;

    Dataset incremental = sample_blobs(blobs, blobs.seed + 19, incremental_counts(cfg));
    GaussianBlobs test_blobs = blobs;
    test_blobs.per_class = cfg.test_per_class;
    Dataset test = sample_blobs(test_blobs, blobs.seed + 29);

    if (blobs.n_classes > st.layer.n_classes())
        st.layer.register_class(static_cast<std::uint32_t>(blobs.n_classes - 1));
    if (method_uses_memory(cfg.method)) write_dataset_to_memory(st, incremental);

    RunRecord rec{cfg.name, method_name(cfg.method), seed, {}, 0};
    for (std::size_t epoch = 1; epoch <= cfg.incremental_epochs; ++epoch) {
        TrainOptions opts = cfg.finetune_opts;
        opts.epochs = 1;
        opts.seed = seed * 1000 + epoch;
        train(st.fe, st.layer, incremental, opts);
        if (epoch % cfg.eval_every != 0 && epoch != cfg.incremental_epochs) continue;

        SplitCounter counter;
        for (const LabeledExample& ex : test) {
            const Vec h = st.fe.extract(ex.x);
            const bool hit = argmax(predict_one(st, cfg, h)) == ex.y;
            counter.add(!cfg.pretrain_classes.contains(ex.y), hit);
        }
        rec.points.push_back(counter.to_point(static_cast<double>(epoch)));
    }
    rec.unadapted_predictions = st.unadapted;
    return rec;
}

inline RunRecord run_online(const ScenarioConfig& cfg, std::uint64_t seed) {
    ScenarioState st = run_training_phase(cfg, seed);
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + seed * 1000003;

    GaussianBlobs test_blobs = blobs;
    test_blobs.per_class = cfg.test_per_class;
    Dataset stream = sample_blobs(test_blobs, blobs.seed + 29);
    std::mt19937_64 rng(blobs.seed + 41);
    std::shuffle(stream.begin(), stream.end(), rng);

    RunRecord rec{cfg.name, method_name(cfg.method), seed, {}, 0};
    SplitCounter counter;
    Dataset buffer;

    for (std::size_t t = 0; t < stream.size(); ++t) {
        const LabeledExample& ex = stream[t];
        const std::uint32_t pred = run_inference_step(ex.x, ex.y, st, cfg);
        counter.add(!cfg.pretrain_classes.contains(ex.y), pred == ex.y);
        if (ex.y >= st.layer.n_classes()) st.layer.register_class(ex.y);
        buffer.push_back(ex);
        const bool boundary = (t + 1) % cfg.finetune_cadence == 0;
        if (boundary || t + 1 == stream.size()) {
            if (boundary) {
                TrainOptions opts = cfg.finetune_opts;
                opts.epochs = 1;
                opts.seed = seed * 1000 + t;
                train(st.fe, st.layer, buffer, opts);
                buffer.clear();
            }
            rec.points.push_back(counter.to_point(static_cast<double>(t + 1)));
        }
    }
    rec.unadapted_predictions = st.unadapted;
    return rec;
}

}  // namespace detail

// Runs the configured scenario once per seed; records are per seed with
// deterministic ordering.
inline std::vector<RunRecord> run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<RunRecord> records;
    for (std::uint64_t seed : cfg.seeds) {
        switch (cfg.kind) {
            case ScenarioKind::Continual:
                records.push_back(detail::run_continual(cfg, seed));
                break;
            case ScenarioKind::Incremental:
                records.push_back(detail::run_incremental(cfg, seed));
                break;
            case ScenarioKind::Online:
                records.push_back(detail::run_online(cfg, seed));
                break;
        }
    }
    return records;
}

// Final memory contents of a single run: the pre-training writes plus, in
// online mode, the per-step stream writes.
inline EpisodicMemory final_memory(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.kind == ScenarioKind::Continual) {
        GaussianBlobs blobs = cfg.task;
        blobs.seed = cfg.task.seed + seed * 1000003;
        const auto perms =
            make_permutations(blobs.d_in, cfg.n_tasks, cfg.permutation_seed + seed);
        const Dataset base_train = sample_blobs(blobs, blobs.seed + 11);
        ScenarioState st{cfg.random_projection
                             ? FeatureExtractor::random_projection(blobs.d_in, cfg.feature_dim,
                                                                   blobs.seed + 17)
                             : FeatureExtractor::identity(blobs.d_in),
                         OutputLayer(cfg.random_projection ? cfg.feature_dim : blobs.d_in,
                                     blobs.n_classes),
                         EpisodicMemory(cfg.random_projection ? cfg.feature_dim : blobs.d_in,
                                        cfg.capacity),
                         {}};
        for (std::size_t t = 0; t < cfg.n_tasks; ++t)
            detail::write_dataset_to_memory(st, apply_permutation(base_train, perms[t]));
        return st.mem;
    }

    ScenarioState st = run_training_phase(cfg, seed);
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + seed * 1000003;
    if (cfg.kind == ScenarioKind::Incremental) {
        st.layer.register_class(static_cast<std::uint32_t>(blobs.n_classes - 1));
        detail::write_dataset_to_memory(
            st, sample_blobs(blobs, blobs.seed + 19, detail::incremental_counts(cfg)));
        return st.mem;
    }

    GaussianBlobs test_blobs = blobs;
    test_blobs.per_class = cfg.test_per_class;
    Dataset stream = sample_blobs(test_blobs, blobs.seed + 29);
    std::mt19937_64 rng(blobs.seed + 41);
    std::shuffle(stream.begin(), stream.end(), rng);
    for (const LabeledExample& ex : stream) run_inference_step(ex.x, ex.y, st, cfg);
    return st.mem;
}

// ---------------------------------------------------------------------------
// Metrics and CSV
// ---------------------------------------------------------------------------

// Mean final-point accuracy over seeds.
inline double mean_final_overall(const std::vector<RunRecord>& records) {
    double sum = 0.0;
    for (const RunRecord& r : records) sum += r.points.back().acc_overall;
    return sum / static_cast<double>(records.size());
}

inline double mean_final_new(const std::vector<RunRecord>& records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const RunRecord& r : records)
        if (r.points.back().acc_new) {
            sum += *r.points.back().acc_new;
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline double mean_final_old(const std::vector<RunRecord>& records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const RunRecord& r : records)
        if (r.points.back().acc_old) {
            sum += *r.points.back().acc_old;
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline std::string format_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string to_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "scenario,method,seed,position,acc_overall,acc_new,acc_old\n";
    for (const RunRecord& r : records) {
        for (const EvalPoint& p : r.points) {
            out << r.scenario << ',' << r.method << ',' << r.seed << ',' << p.position << ','
                << format_acc(p.acc_overall) << ','
                << (p.acc_new ? format_acc(*p.acc_new) : std::string()) << ','
                << (p.acc_old ? format_acc(*p.acc_old) : std::string()) << '\n';
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Hyper-parameter sweeps
// ---------------------------------------------------------------------------

enum class SweepAxes { EtaBeta, LambdaSteps };

struct SweepPoint {
    double a = 0.0;  // eta or lambda
    double b = 0.0;  // beta or steps
    std::vector<RunRecord> records;
};

inline std::vector<SweepPoint> sweep(const ScenarioConfig& cfg, SweepAxes axes,
                                     const std::vector<double>& as,
                                     const std::vector<double>& bs) {
    require(!as.empty() && !bs.empty(), "sweep: grid must be non-empty");
    std::vector<SweepPoint> grid;
    for (double a : as) {
        for (double b : bs) {
            ScenarioConfig point = cfg;
            if (axes == SweepAxes::EtaBeta) {
                point.adaptation.eta = a;
                point.adaptation.beta = b;
            } else {
                point.adaptation.lambda = a;
                point.adaptation.steps = static_cast<int>(b);
            }
            grid.push_back(SweepPoint{a, b, run_scenario(point)});
        }
    }
    return grid;
}

}  // namespace hebb
