#include "tad/cli.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>

#include "tad/config.hpp"
#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/harness.hpp"
#include "tad/log.hpp"

namespace tad {

namespace {

using nlohmann::json;

struct RunOutput {
    TadResult result;
    ExperimentConfig cfg;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

RunOutput run_experiment(const ExperimentConfig& cfg) {
    log_info("generating data: " + std::to_string(cfg.data.num_classes) + " classes, " +
             std::to_string(cfg.train_per_class) + "+" + std::to_string(cfg.test_per_class) +
             " samples/class, dim " + std::to_string(cfg.data.dim));
    const LabeledDataset blobs = make_blobs(cfg.data);
    const auto [train, test] = split_train_test(blobs, cfg.train_per_class, cfg.test_per_class);
    const NoisyDataset noisy = inject_noise(train, cfg.noise);

    log_info("running dual loop: rounds=" + std::to_string(cfg.loop.rounds) +
             " experts=" + std::to_string(cfg.loop.num_experts) + " ipc=" +
             std::to_string(cfg.loop.ipc));
    RunOutput out{run_dual_loop(noisy, cfg.loop, &test), cfg};
    return out;
}

json result_json(const RunOutput& out) {
    const TadResult& r = out.result;
    json j;
    j["mode"] = r.baseline ? "baseline" : "tad";
    j["seed"] = out.cfg.seed;
    j["config"] = out.cfg.echo;
    j["rounds_run"] = static_cast<int>(r.history.size());
    j["trusted_count"] = static_cast<int>(r.final_partition.trusted_idx.size());
    j["trusted_fraction"] = r.final_partition.size() == 0
                                ? 0.0
                                : static_cast<double>(r.final_partition.trusted_idx.size()) /
                                      static_cast<double>(r.final_partition.size());
    if (r.eval) {
        j["accuracies"] = r.eval->accuracies;
        j["accuracy_mean"] = r.eval->mean;
        j["accuracy_std"] = r.eval->stddev;
    }
    if (!r.history.empty()) {
        const RoundRecord& last = r.history.back();
        j["final_precision"] = finite_or_null(last.precision);
        j["final_recall"] = finite_or_null(last.recall);
        j["final_f1"] = finite_or_null(last.f1);
    }
    return j;
}

void write_artifacts(const std::filesystem::path& dir, const RunOutput& out) {
    std::filesystem::create_directories(dir);
    write_file(dir / "result.json", result_json(out).dump(2) + "\n");
    write_history_csv(dir / "history.csv", out.result.history);
    std::vector<std::pair<int, Move>> moves;
    moves.reserve(out.result.moves.size());
    for (const auto& m : out.result.moves) moves.emplace_back(m.round, m.move);
    write_moves_csv(dir / "moves.csv", moves);
    write_distill_log(dir / "distill_log.csv", out.result.distill_log);
    if (!out.result.distill_step_losses.empty())
        write_step_losses(dir / "distill_step_losses.csv", out.result.distill_step_losses);
    save_synthetic(dir, out.result.synthetic);
    save_partition(dir / "partition.json", out.result.final_partition);
    save_gmm(dir / "gmm.json", out.result.final_gmm);
}

std::string summary_line(const RunOutput& out) {
    char buf[160];
    const double mean = out.result.eval ? out.result.eval->mean : std::nan("");
    const double std = out.result.eval ? out.result.eval->stddev : std::nan("");
    const double f1 = out.result.history.empty() ? std::nan("") : out.result.history.back().f1;
    std::snprintf(buf, sizeof(buf), "%s accuracy %.4f +- %.4f, partition F1 %.4f",
                  out.result.baseline ? "baseline" : "tad", mean, std, f1);
    return buf;
}

// Returns exit status; on mid-run failure leaves a FAILED marker in dir.
int run_into(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::string* summary) {
    std::filesystem::create_directories(dir);
    const auto marker = dir / "FAILED";
    std::filesystem::remove(marker);
    try {
        const RunOutput out = run_experiment(cfg);
        write_artifacts(dir, out);
        if (summary) *summary = summary_line(out);
        return 0;
    } catch (const std::exception& e) {
        write_file(marker, std::string(e.what()) + "\n");
        if (summary) *summary = std::string("FAILED: ") + e.what();
        return 1;
    }
}

}  // namespace

int cmd_run(const RunOptions& opt) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(opt.config_path, opt.overrides, opt.seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    const std::filesystem::path dir = opt.out_dir.value_or(cfg.out_dir);
    std::string summary;
    const int status = run_into(dir, cfg, &summary);
    if (status == 0) {
        std::printf("%s (artifacts in %s)\n", summary.c_str(), dir.string().c_str());
    } else {
        std::fprintf(stderr, "error: %s\n", summary.c_str());
    }
    return status;
}

int cmd_eval(const EvalOptions& opt) {
    try {
        json doc;
        if (opt.config_path) {
            doc = json::parse(read_file(*opt.config_path));
        } else {
            const auto result = json::parse(read_file(opt.artifact_dir / "result.json"));
            if (!result.contains("config"))
                throw ParseError((opt.artifact_dir / "result.json").string(), 0,
                                 "missing embedded config");
            doc = result.at("config");
        }
        const ExperimentConfig cfg = parse_config(doc);
        const int repeats = opt.repeats.value_or(cfg.loop.eval_repeats);

        const SyntheticSet synthetic = load_synthetic(opt.artifact_dir);
        const LabeledDataset blobs = make_blobs(cfg.data);
        const auto [train, test] = split_train_test(blobs, cfg.train_per_class, cfg.test_per_class);
        (void)train;
        const StudentEval eval = evaluate_student(synthetic, test, cfg.loop.student, repeats);

        std::string csv = "repeat,accuracy\n";
        for (std::size_t i = 0; i < eval.accuracies.size(); ++i) {
            std::printf("repeat %zu: accuracy %.4f\n", i, eval.accuracies[i]);
            csv += std::to_string(i) + "," + format_double(eval.accuracies[i]) + "\n";
        }
        csv += "mean," + format_double(eval.mean) + "\n";
        csv += "std," + format_double(eval.stddev) + "\n";
        write_file(opt.artifact_dir / "eval.csv", csv);
        std::printf("accuracy %.4f +- %.4f over %d repeats\n", eval.mean, eval.stddev, repeats);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

namespace {

std::string sanitize(const std::string& s) {
    std::string out;
    for (const char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return out;
}

}  // namespace

int cmd_sweep(const SweepOptions& opt) {
    if (opt.values.empty()) {
        std::fprintf(stderr, "error: sweep needs at least one --values entry\n");
        return 1;
    }
    if (opt.parallel < 1) {
        std::fprintf(stderr, "error: --parallel must be >= 1\n");
        return 1;
    }

    // Validate every point before running anything.
    std::vector<ExperimentConfig> configs;
    try {
        for (const auto& value : opt.values) {
            std::vector<std::string> overrides = opt.overrides;
            overrides.push_back(opt.axis + "=" + value);
            configs.push_back(load_config(opt.config_path, overrides, opt.seed));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    const auto n = configs.size();
    std::vector<std::string> summaries(n);
    std::vector<int> statuses(n, 0);
    std::vector<double> runtimes(n, 0.0);
    std::vector<std::filesystem::path> dirs(n);
    for (std::size_t i = 0; i < n; ++i) dirs[i] = opt.out_dir / sanitize(opt.values[i]);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            const auto t0 = std::chrono::steady_clock::now();
            statuses[i] = run_into(dirs[i], configs[i], &summaries[i]);
            runtimes[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(opt.parallel), n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::string csv = "value,accuracy_mean,accuracy_std,f1,runtime_seconds\n";
    int status = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::printf("%s=%s: %s\n", opt.axis.c_str(), opt.values[i].c_str(), summaries[i].c_str());
        double mean = std::nan(""), stddev = std::nan(""), f1 = std::nan("");
        if (statuses[i] == 0) {
            const auto result = json::parse(read_file(dirs[i] / "result.json"));
            if (result.contains("accuracy_mean")) {
                mean = result.at("accuracy_mean").get<double>();
                stddev = result.at("accuracy_std").get<double>();
            }
            if (result.contains("final_f1") && result.at("final_f1").is_number())
                f1 = result.at("final_f1").get<double>();
        } else {
            status = 1;
        }
        csv += opt.values[i] + "," + format_double(mean) + "," + format_double(stddev) + "," +
               format_double(f1) + "," + format_double(runtimes[i]) + "\n";
    }
    std::filesystem::create_directories(opt.out_dir);
    write_file(opt.out_dir / "sweep.csv", csv);
    std::printf("sweep table written to %s\n", (opt.out_dir / "sweep.csv").string().c_str());
    return status;
}

}  // namespace tad
