#ifndef TAD_CONFIG_HPP
#define TAD_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tad/dataset.hpp"
#include "tad/harness.hpp"

namespace tad {

// One global seed fans out to sub-seeds through these streams (derive_seed):
//   11 data (blob centers/samples), 12 noise, 13 dual loop (experts, anchors,
//   distillation; see harness.cpp for the per-round sub-streams), 14 student
//   evaluation, 15 embedder projection.
inline constexpr std::uint64_t kSeedStreamData = 11;
inline constexpr std::uint64_t kSeedStreamNoise = 12;
inline constexpr std::uint64_t kSeedStreamLoop = 13;
inline constexpr std::uint64_t kSeedStreamStudent = 14;
inline constexpr std::uint64_t kSeedStreamEmbed = 15;

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "tad_out";
    BlobSpec data;  // samples_per_class = train + test rows per class
    int train_per_class = 0;
    int test_per_class = 0;
    NoiseSpec noise;
    DualLoopConfig loop;
    nlohmann::json echo;  // the normalized document, embedded into result.json
};

// Full document with every key at its default value.
nlohmann::json default_config();

// Applies one dotted-path KEY=VALUE override (e.g. "noise.ratio=0.2"). The
// value is parsed as JSON when possible, otherwise taken as a string. Creating
// unknown keys is allowed here; validation rejects them afterwards.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Schema validation + defaults + seed fan-out. Throws ConfigError naming the
// failing key path.
ExperimentConfig parse_config(const nlohmann::json& doc);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides,
                             std::optional<std::uint64_t> seed_override);

}  // namespace tad

#endif  // TAD_CONFIG_HPP
