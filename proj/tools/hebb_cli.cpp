// Command-line harness: run scenarios, sweep hyper-parameters, verify the
// numerical invariants, and inspect memory snapshots.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hebb/harness.hpp"
#include "hebb/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.contains(key))
            throw ConfigError("unknown key '" + path + key + "'");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& path) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid value at '" + path + key + "': " + e.what());
    }
}

struct CliConfig {
    hebb::ScenarioConfig scenario;
    std::vector<hebb::Method> methods = {hebb::Method::Hebb};
    std::string output = "results.csv";
};

CliConfig parse_config(const json& root) {
    CliConfig cfg;
    hebb::ScenarioConfig& sc = cfg.scenario;

    reject_unknown_keys(root,
                        {"scenario", "task", "features", "adaptation", "mixture", "memory",
                         "training", "methods", "seeds", "output"},
                        "");

    if (root.contains("scenario")) {
        const json& s = root.at("scenario");
        reject_unknown_keys(s,
                            {"kind", "name", "n_tasks", "epochs_per_task", "permutation_seed",
                             "pretrain_classes", "incremental_epochs", "eval_every",
                             "finetune_cadence", "memory_write", "test_per_class",
                             "imbalance_ratio"},
                            "scenario.");
        std::string kind = "online";
        read_field(s, "kind", kind, "scenario.");
        if (kind == "continual")
            sc.kind = hebb::ScenarioKind::Continual;
        else if (kind == "incremental")
            sc.kind = hebb::ScenarioKind::Incremental;
        else if (kind == "online")
            sc.kind = hebb::ScenarioKind::Online;
        else
            throw ConfigError("invalid value at 'scenario.kind': " + kind);
        sc.name = kind;
        read_field(s, "name", sc.name, "scenario.");
        read_field(s, "n_tasks", sc.n_tasks, "scenario.");
        read_field(s, "epochs_per_task", sc.epochs_per_task, "scenario.");
        read_field(s, "permutation_seed", sc.permutation_seed, "scenario.");
        if (s.contains("pretrain_classes")) {
            std::vector<std::uint32_t> classes;
            read_field(s, "pretrain_classes", classes, "scenario.");
            sc.pretrain_classes = {classes.begin(), classes.end()};
        }
        read_field(s, "incremental_epochs", sc.incremental_epochs, "scenario.");
        read_field(s, "eval_every", sc.eval_every, "scenario.");
        read_field(s, "finetune_cadence", sc.finetune_cadence, "scenario.");
        read_field(s, "memory_write", sc.memory_write, "scenario.");
        read_field(s, "test_per_class", sc.test_per_class, "scenario.");
        read_field(s, "imbalance_ratio", sc.imbalance_ratio, "scenario.");
    }

    if (root.contains("task")) {
        const json& t = root.at("task");
        reject_unknown_keys(t, {"n_classes", "d_in", "per_class", "spread", "seed"}, "task.");
        read_field(t, "n_classes", sc.task.n_classes, "task.");
        read_field(t, "d_in", sc.task.d_in, "task.");
        read_field(t, "per_class", sc.task.per_class, "task.");
        read_field(t, "spread", sc.task.spread, "task.");
        read_field(t, "seed", sc.task.seed, "task.");
    }

    if (root.contains("features")) {
        const json& f = root.at("features");
        reject_unknown_keys(f, {"random_projection", "dim"}, "features.");
        read_field(f, "random_projection", sc.random_projection, "features.");
        read_field(f, "dim", sc.feature_dim, "features.");
    }

    if (root.contains("adaptation")) {
        const json& a = root.at("adaptation");
        reject_unknown_keys(a, {"k", "eps", "lambda", "steps", "eta", "beta", "fixed_weight"},
                            "adaptation.");
        read_field(a, "k", sc.adaptation.k, "adaptation.");
        read_field(a, "eps", sc.adaptation.eps, "adaptation.");
        read_field(a, "lambda", sc.adaptation.lambda, "adaptation.");
        read_field(a, "steps", sc.adaptation.steps, "adaptation.");
        read_field(a, "eta", sc.adaptation.eta, "adaptation.");
        read_field(a, "beta", sc.adaptation.beta, "adaptation.");
        read_field(a, "fixed_weight", sc.adaptation.fixed_weight, "adaptation.");
    }

    if (root.contains("mixture")) {
        const json& m = root.at("mixture");
        reject_unknown_keys(m, {"gamma", "theta", "normalize_terms"}, "mixture.");
        read_field(m, "gamma", sc.mixture.gamma, "mixture.");
        read_field(m, "theta", sc.mixture.theta, "mixture.");
        read_field(m, "normalize_terms", sc.mixture.normalize_terms, "mixture.");
    }

    if (root.contains("memory")) {
        const json& m = root.at("memory");
        reject_unknown_keys(m, {"capacity", "max_size"}, "memory.");
        std::string capacity = "unbounded";
        read_field(m, "capacity", capacity, "memory.");
        if (capacity == "unbounded") {
            sc.capacity = hebb::CapacityPolicy::unbounded();
        } else if (capacity == "ring") {
            std::uint64_t max_size = 0;
            read_field(m, "max_size", max_size, "memory.");
            if (max_size == 0)
                throw ConfigError("'memory.max_size' must be a positive integer for ring");
            sc.capacity = hebb::CapacityPolicy::ring_buffer(max_size);
        } else {
            throw ConfigError("invalid value at 'memory.capacity': " + capacity);
        }
    }

    if (root.contains("training")) {
        const json& t = root.at("training");
        reject_unknown_keys(t, {"pretrain", "finetune"}, "training.");
        auto read_opts = [](const json& o, hebb::TrainOptions& opts, const std::string& path) {
            reject_unknown_keys(o, {"epochs", "lr", "batch_size"}, path);
            read_field(o, "epochs", opts.epochs, path);
            read_field(o, "lr", opts.lr, path);
            read_field(o, "batch_size", opts.batch_size, path);
            if (opts.lr <= 0.0) throw ConfigError("'" + path + "lr' must be positive");
        };
        if (t.contains("pretrain")) read_opts(t.at("pretrain"), sc.pretrain_opts, "training.pretrain.");
        if (t.contains("finetune")) read_opts(t.at("finetune"), sc.finetune_opts, "training.finetune.");
    }

    if (root.contains("methods")) {
        std::vector<std::string> names;
        read_field(root, "methods", names, "");
        cfg.methods.clear();
        for (const std::string& name : names) {
            const auto m = hebb::method_from_name(name);
            if (!m) throw ConfigError("invalid value at 'methods': " + name);
            cfg.methods.push_back(*m);
        }
        if (cfg.methods.empty()) throw ConfigError("'methods' must not be empty");
    }

    if (root.contains("seeds")) {
        read_field(root, "seeds", sc.seeds, "");
        if (sc.seeds.empty()) throw ConfigError("'seeds' must not be empty");
    }

    read_field(root, "output", cfg.output, "");

    sc.validate();
    return cfg;
}

CliConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(root);
}

fs::path resolve_output(const std::string& requested) {
    fs::path out(requested);
    if (const char* dir = std::getenv("HEBB_OUT_DIR"); dir && *dir)
        out = fs::path(dir) / out.filename();
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("failed to write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& method_overrides,
            const std::string& out_override, const std::vector<std::uint64_t>& seed_overrides,
            const std::string& save_memory) {
    CliConfig cfg = load_config(config_path);
    if (!method_overrides.empty()) {
        cfg.methods.clear();
        for (const std::string& name : method_overrides) {
            const auto m = hebb::method_from_name(name);
            if (!m) throw ConfigError("unknown method: " + name);
            cfg.methods.push_back(*m);
        }
    }
    if (!seed_overrides.empty()) cfg.scenario.seeds = seed_overrides;
    if (!out_override.empty()) cfg.output = out_override;

    std::vector<hebb::RunRecord> all;
    std::printf("%-12s %10s %10s %10s\n", "method", "overall", "new", "old");
    for (hebb::Method m : cfg.methods) {
        hebb::ScenarioConfig sc = cfg.scenario;
        sc.method = m;
        const std::vector<hebb::RunRecord> records = hebb::run_scenario(sc);
        std::printf("%-12s %10.4f %10.4f %10.4f\n", hebb::method_name(m),
                    hebb::mean_final_overall(records), hebb::mean_final_new(records),
                    hebb::mean_final_old(records));
        all.insert(all.end(), records.begin(), records.end());
    }

    const fs::path out = resolve_output(cfg.output);
    write_file_atomic(out, hebb::to_csv(all));
    std::printf("wrote %s\n", out.string().c_str());

    if (!save_memory.empty()) {
        hebb::ScenarioConfig sc = cfg.scenario;
        sc.method = cfg.methods.back();
        const auto bytes = hebb::final_memory(sc, sc.seeds.back()).snapshot();
        const fs::path mem_out = resolve_output(save_memory);
        write_file_atomic(mem_out, std::string(bytes.begin(), bytes.end()));
        std::printf("wrote %s\n", mem_out.string().c_str());
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axes_name,
              const std::vector<double>& as, const std::vector<double>& bs,
              const std::string& out_override) {
    CliConfig cfg = load_config(config_path);
    const hebb::SweepAxes axes = axes_name == "lambda-steps" ? hebb::SweepAxes::LambdaSteps
                                                             : hebb::SweepAxes::EtaBeta;
    // Pick a configured method that actually responds to the swept axes.
    auto responds = [axes](hebb::Method m) {
        switch (m) {
            case hebb::Method::Parametric:
            case hebb::Method::Mixture:
                return false;
            case hebb::Method::MbPA:
                return axes == hebb::SweepAxes::LambdaSteps;
            default:
                return true;  // Hebb family uses lambda/steps and eta/beta
        }
    };
    cfg.scenario.method = hebb::Method::Hebb;
    for (hebb::Method m : cfg.methods)
        if (responds(m)) {
            cfg.scenario.method = m;
            break;
        }

    const auto grid = hebb::sweep(cfg.scenario, axes, as, bs);
    const char* a_label = axes == hebb::SweepAxes::EtaBeta ? "eta" : "lambda";
    const char* b_label = axes == hebb::SweepAxes::EtaBeta ? "beta" : "steps";

    std::ostringstream csv;
    csv << a_label << ',' << b_label << ",acc_overall,acc_new,acc_old\n";
    std::printf("%-8s %-8s %10s %10s %10s\n", a_label, b_label, "overall", "new", "old");
    for (const hebb::SweepPoint& point : grid) {
        const double overall = hebb::mean_final_overall(point.records);
        const double acc_new = hebb::mean_final_new(point.records);
        const double acc_old = hebb::mean_final_old(point.records);
        std::printf("%-8g %-8g %10.4f %10.4f %10.4f\n", point.a, point.b, overall, acc_new,
                    acc_old);
        csv << point.a << ',' << point.b << ',' << hebb::format_acc(overall) << ','
            << hebb::format_acc(acc_new) << ',' << hebb::format_acc(acc_old) << '\n';
    }

    const fs::path out = resolve_output(out_override.empty() ? "sweep.csv" : out_override);
    write_file_atomic(out, csv.str());
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

int cmd_verify(bool corrupt_gradient) {
    const auto results = hebb::verify::run_all(corrupt_gradient);
    bool all_passed = true;
    for (const auto& res : results) {
        std::printf("%-40s %s (%zu checks)\n", res.name.c_str(),
                    res.passed() ? "PASS" : "FAIL", res.checked);
        if (!res.passed()) {
            std::printf("  first failure: %s\n", res.detail.c_str());
            all_passed = false;
        }
    }
    return all_passed ? 0 : 1;
}

int cmd_inspect_memory(const std::string& snapshot_path, double beta) {
    const hebb::EpisodicMemory mem = hebb::EpisodicMemory::restore(read_file(snapshot_path));
    std::printf("entries: %zu\n", mem.size());
    std::printf("dim: %zu\n", mem.dim());
    if (mem.capacity().kind == hebb::CapacityPolicy::Kind::Unbounded)
        std::printf("capacity: unbounded\n");
    else
        std::printf("capacity: ring buffer, max %llu\n",
                    static_cast<unsigned long long>(mem.capacity().max_size));
    std::printf("%-8s %10s %10s\n", "class", "count", "E_i");
    for (const auto& [c, n] : mem.class_counts())
        std::printf("%-8u %10llu %10.6f\n", c, static_cast<unsigned long long>(n),
                    hebb::dynamic_weight(n, beta));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory-based Hebbian parameter adaptation harness"};
    app.require_subcommand(1);
    app.footer("Flag overrides take precedence over config-file values.\n"
               "HEBB_OUT_DIR redirects output files to the given directory.");

    std::string config_path;
    std::vector<std::string> methods;
    std::string out_path;
    std::vector<std::uint64_t> seeds;
    auto* run = app.add_subcommand("run", "Run a scenario from a config file");
    run->add_option("-c,--config", config_path, "JSON config file")->required();
    run->add_option("-m,--method", methods,
                    "Override methods (repeatable): parametric, mixture, mbpa, hebb, "
                    "hebb-v1, hebb-v2, hebb-v3");
    run->add_option("-o,--out", out_path, "Override output CSV path");
    run->add_option("-s,--seed", seeds, "Override seeds (repeatable)");
    std::string save_memory;
    run->add_option("--save-memory", save_memory,
                    "Write the final memory snapshot (last method, last seed) to this path");

    std::string axes = "eta-beta";
    std::vector<double> as, bs;
    std::string sweep_out;
    auto* sw = app.add_subcommand("sweep", "Grid sweep over adaptation hyper-parameters");
    sw->add_option("-c,--config", config_path, "JSON config file")->required();
    sw->add_option("--axes", axes, "Grid axes: eta-beta or lambda-steps")
        ->check(CLI::IsMember({"eta-beta", "lambda-steps"}));
    sw->add_option("--a", as, "First-axis values")->required();
    sw->add_option("--b", bs, "Second-axis values")->required();
    sw->add_option("-o,--out", sweep_out, "Output CSV path");

    bool corrupt_gradient = false;
    auto* verify = app.add_subcommand("verify", "Run the numerical invariant suites");
    verify->add_flag("--corrupt-gradient", corrupt_gradient,
                     "Test hook: inject a gradient error to demonstrate failure reporting");

    std::string snapshot_path;
    double beta = 0.9;
    auto* inspect = app.add_subcommand("inspect-memory", "Print stats of a memory snapshot");
    inspect->add_option("snapshot", snapshot_path, "Snapshot file (HEBM format)")->required();
    inspect->add_option("--beta", beta, "Decay rate for the printed E_i values")
        ->check(CLI::Range(0.0, 0.999999));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, methods, out_path, seeds, save_memory);
        if (sw->parsed()) return cmd_sweep(config_path, axes, as, bs, sweep_out);
        if (verify->parsed()) return cmd_verify(corrupt_gradient);
        if (inspect->parsed()) return cmd_inspect_memory(snapshot_path, beta);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
