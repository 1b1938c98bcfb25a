#ifndef TAD_CLI_HPP
#define TAD_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tad {

struct RunOptions {
    std::filesystem::path config_path;
    std::vector<std::string> overrides;  // KEY=VALUE
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
};

// Full pipeline: dataset, dual loop, artifacts, one summary line on stdout.
int cmd_run(const RunOptions& opt);

struct EvalOptions {
    std::filesystem::path artifact_dir;  // a cmd_run output directory
    std::optional<std::filesystem::path> config_path;  // replaces the embedded echo
    std::optional<int> repeats;
};

// Re-evaluates a saved synthetic set against a freshly generated test set.
int cmd_eval(const EvalOptions& opt);

struct SweepOptions {
    std::filesystem::path config_path;
    std::string axis;                  // dotted config key
    std::vector<std::string> values;   // JSON-parsed per point
    std::filesystem::path out_dir = "sweep_out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    int parallel = 1;
};

// One cmd_run per axis value into out_dir subdirectories plus an aggregate CSV.
int cmd_sweep(const SweepOptions& opt);

}  // namespace tad

#endif  // TAD_CLI_HPP
