#include <cmath>

#include "doctest.h"
#include "hebb/harness.hpp"

using namespace hebb;

namespace {

ScenarioConfig small_online() {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::Online;
    cfg.name = "online";
    cfg.task.n_classes = 6;
    cfg.task.d_in = 8;
    cfg.task.per_class = 30;
    cfg.task.spread = 0.5;
    cfg.pretrain_classes = {0, 1, 2};
    cfg.test_per_class = 15;
    cfg.finetune_cadence = 20;
    cfg.pretrain_opts.epochs = 15;
    cfg.seeds = {1};
    return cfg;
}

}  // namespace

TEST_CASE("blob sampling is deterministic and permutation preserves distances") {
    GaussianBlobs blobs;
    blobs.n_classes = 4;
    blobs.d_in = 8;
    blobs.per_class = 10;
    const Dataset a = sample_blobs(blobs, 3);
    const Dataset b = sample_blobs(blobs, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].x == b[i].x);

    const auto perms = make_permutations(8, 3, 5);
    CHECK(perms[0] == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
    const Dataset permuted = apply_permutation(a, perms[2]);
    for (std::size_t i = 0; i + 1 < a.size(); i += 2)
        CHECK(squared_distance(a[i].x, a[i + 1].x) ==
              doctest::Approx(squared_distance(permuted[i].x, permuted[i + 1].x))
                  .epsilon(1e-12));
}

TEST_CASE("run_training_phase stores one memory entry per training example") {
    ScenarioConfig cfg = small_online();
    const ScenarioState st = run_training_phase(cfg, 1);
    CHECK(st.mem.size() == cfg.pretrain_classes.size() * cfg.task.per_class);
    for (std::uint32_t c : cfg.pretrain_classes)
        CHECK(st.mem.class_count(c) == cfg.task.per_class);
    CHECK(st.layer.n_classes() == 3);

    const ScenarioState again = run_training_phase(cfg, 1);
    CHECK(again.layer == st.layer);
    CHECK(again.mem == st.mem);
}

TEST_CASE("run_inference_step writes to memory after prediction in online mode") {
    ScenarioConfig cfg = small_online();
    ScenarioState st = run_training_phase(cfg, 1);
    const std::size_t before = st.mem.size();

    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + 1 * 1000003;
    const Dataset stream = sample_blobs(blobs, 999);

    // a sample of an unseen class: prediction happens before its own write,
    // so the first sighting cannot retrieve itself
    const LabeledExample* novel = nullptr;
    for (const LabeledExample& ex : stream)
        if (!cfg.pretrain_classes.contains(ex.y)) {
            novel = &ex;
            break;
        }
    REQUIRE(novel != nullptr);
    const std::uint32_t pred = run_inference_step(novel->x, novel->y, st, cfg);
    CHECK(pred < 3);  // the new class was not registered at prediction time
    CHECK(st.mem.size() == before + 1);
    CHECK(st.layer.n_classes() == novel->y + 1);
}

TEST_CASE("parametric method never consults the memory") {
    ScenarioConfig cfg = small_online();
    cfg.method = Method::Parametric;
    ScenarioState st = run_training_phase(cfg, 1);
    const std::size_t before = st.mem.size();
    const Vec x(cfg.task.d_in, 0.0);
    const Vec h = st.fe.extract(x);
    const std::uint32_t pred = run_inference_step(x, 0, st, cfg);
    const Vec p = st.layer.predict_probs(h);
    CHECK(pred == std::max_element(p.begin(), p.end()) - p.begin());
    CHECK(st.mem.size() == before);  // no memory write for parametric
}

TEST_CASE("online memory counts equal pretrain plus stream histogram") {
    ScenarioConfig cfg = small_online();
    cfg.method = Method::Hebb;
    const std::vector<RunRecord> records = run_scenario(cfg);
    REQUIRE(records.size() == 1);

    // replay the state to inspect final memory
    ScenarioState st = run_training_phase(cfg, 1);
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + 1 * 1000003;
    GaussianBlobs test_blobs = blobs;
    test_blobs.per_class = cfg.test_per_class;
    const Dataset stream = sample_blobs(test_blobs, blobs.seed + 29);
    for (const LabeledExample& ex : stream) run_inference_step(ex.x, ex.y, st, cfg);

    for (std::uint32_t c = 0; c < cfg.task.n_classes; ++c) {
        const std::uint64_t pretrain =
            cfg.pretrain_classes.contains(c) ? cfg.task.per_class : 0;
        CHECK(st.mem.class_count(c) == pretrain + cfg.test_per_class);
    }
}

TEST_CASE("overall accuracy decomposes into new/old parts") {
    ScenarioConfig cfg = small_online();
    cfg.method = Method::Hebb;
    const std::vector<RunRecord> records = run_scenario(cfg);
    const EvalPoint& final = records[0].points.back();
    REQUIRE(final.acc_new);
    REQUIRE(final.acc_old);
    const double n_new = 3.0 * cfg.test_per_class;
    const double n_old = 3.0 * cfg.test_per_class;
    const double weighted =
        (*final.acc_new * n_new + *final.acc_old * n_old) / (n_new + n_old);
    CHECK(final.acc_overall == doctest::Approx(weighted).epsilon(1e-12));
}

TEST_CASE("identical configs produce identical records and CSV") {
    ScenarioConfig cfg = small_online();
    cfg.method = Method::MbPA;
    const std::string a = to_csv(run_scenario(cfg));
    const std::string b = to_csv(run_scenario(cfg));
    CHECK(a == b);
    CHECK(a.find("scenario,method,seed,position,acc_overall,acc_new,acc_old") == 0);
}

TEST_CASE("continual with one task reduces to plain train/test") {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::Continual;
    cfg.name = "continual";
    cfg.task.n_classes = 4;
    cfg.task.d_in = 6;
    cfg.task.per_class = 40;
    cfg.n_tasks = 1;
    cfg.epochs_per_task = 20;
    cfg.test_per_class = 10;
    cfg.seeds = {2};
    cfg.method = Method::Parametric;
    const std::vector<RunRecord> records = run_scenario(cfg);
    REQUIRE(records.size() == 1);
    REQUIRE(records[0].points.size() == 1);
    CHECK(records[0].points[0].per_task.size() == 1);
    CHECK(records[0].points[0].acc_overall > 0.8);
}

TEST_CASE("incremental reports new/old split and grows memory once") {
    ScenarioConfig cfg = small_online();
    cfg.kind = ScenarioKind::Incremental;
    cfg.name = "incremental";
    cfg.incremental_epochs = 3;
    cfg.method = Method::Hebb;
    const std::vector<RunRecord> records = run_scenario(cfg);
    REQUIRE(records[0].points.size() == 3);
    for (const EvalPoint& p : records[0].points) {
        CHECK(p.acc_new);
        CHECK(p.acc_old);
        CHECK(p.acc_overall >= 0.0);
        CHECK(p.acc_overall <= 1.0);
    }
}

TEST_CASE("imbalance shrinks the minor half of new classes") {
    ScenarioConfig cfg = small_online();
    cfg.kind = ScenarioKind::Incremental;
    cfg.imbalance_ratio = 2.0;
    // new classes are {3,4,5}; the later half {4,5} gets per_class/2
    ScenarioState st = run_training_phase(cfg, 1);
    GaussianBlobs blobs = cfg.task;
    blobs.seed = cfg.task.seed + 1 * 1000003;
    const Dataset inc = sample_blobs(blobs, blobs.seed + 19, detail::incremental_counts(cfg));
    std::map<std::uint32_t, std::size_t> hist;
    for (const LabeledExample& ex : inc) ++hist[ex.y];
    CHECK(hist[3] == cfg.task.per_class);
    CHECK(hist[4] == cfg.task.per_class / 2);
    CHECK(hist[5] == cfg.task.per_class / 2);
}

TEST_CASE("sweep with a 1x1 grid equals a single scenario run") {
    ScenarioConfig cfg = small_online();
    cfg.method = Method::Hebb;
    const auto grid = sweep(cfg, SweepAxes::EtaBeta, {cfg.adaptation.eta},
                            {cfg.adaptation.beta});
    REQUIRE(grid.size() == 1);
    CHECK(grid[0].a == cfg.adaptation.eta);
    CHECK(grid[0].b == cfg.adaptation.beta);
    CHECK(to_csv(grid[0].records) == to_csv(run_scenario(cfg)));
}

TEST_CASE("pretrain covering all classes reports new-class accuracy as absent") {
    ScenarioConfig cfg = small_online();
    cfg.kind = ScenarioKind::Incremental;
    cfg.incremental_epochs = 2;
    cfg.pretrain_classes = {0, 1, 2, 3, 4, 5};
    const std::vector<RunRecord> records = run_scenario(cfg);
    for (const EvalPoint& p : records[0].points) {
        CHECK(!p.acc_new);  // absent, not zero
        CHECK(p.acc_old);
        CHECK(p.acc_overall == *p.acc_old);
    }
}

TEST_CASE("invalid configurations are rejected before any compute") {
    ScenarioConfig bad = small_online();
    bad.seeds.clear();
    CHECK_THROWS_AS(static_cast<void>(run_scenario(bad)), std::invalid_argument);

    ScenarioConfig worse = small_online();
    worse.imbalance_ratio = 0.5;
    CHECK_THROWS_AS(static_cast<void>(run_scenario(worse)), std::invalid_argument);
}
