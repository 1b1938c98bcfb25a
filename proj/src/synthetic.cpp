#include "tad/synthetic.hpp"

#include <nlohmann/json.hpp>
#include <string>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

SyntheticSet init_synthetic(const DatasetView& source, int ipc, std::uint64_t seed) {
    if (ipc < 1) throw InvalidSpecError("ipc must be >= 1");
    if (source.num_classes < 1) throw InvalidSpecError("source view has no classes");

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(source.num_classes));
    for (int j = 0; j < source.size(); ++j) {
        const int label = source.labels[j];
        if (label < 0 || label >= source.num_classes)
            throw IndexError("label " + std::to_string(label) + " out of range");
        by_class[static_cast<std::size_t>(label)].push_back(source.indices[j]);
    }

    SyntheticSet set;
    set.ipc = ipc;
    set.num_classes = source.num_classes;
    set.features.resize(static_cast<Eigen::Index>(ipc) * source.num_classes, source.features->cols());
    set.labels.reserve(static_cast<std::size_t>(ipc) * source.num_classes);

    Rng rng(derive_seed(seed, 6));
    Eigen::Index row = 0;
    for (int c = 0; c < source.num_classes; ++c) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        if (static_cast<int>(pool.size()) < ipc)
            throw InsufficientSamplesError("class " + std::to_string(c) + " has " +
                                           std::to_string(pool.size()) + " samples, ipc is " +
                                           std::to_string(ipc));
        // Partial Fisher-Yates: the first ipc entries become the draw.
        for (int k = 0; k < ipc; ++k) {
            const auto j = k + static_cast<int>(rng.integer(pool.size() - static_cast<std::size_t>(k)));
            std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
            set.features.row(row++) = source.features->row(pool[static_cast<std::size_t>(k)]);
            set.labels.push_back(c);
        }
    }
    return set;
}

void save_synthetic(const std::filesystem::path& dir, const SyntheticSet& set) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir / "synthetic_features.csv", set.features);
    write_int_csv(dir / "synthetic_labels.csv", set.labels);
    nlohmann::json meta;
    meta["ipc"] = set.ipc;
    meta["num_classes"] = set.num_classes;
    write_file(dir / "synthetic_meta.json", meta.dump(2) + "\n");
}

SyntheticSet load_synthetic(const std::filesystem::path& dir) {
    SyntheticSet set;
    set.features = read_matrix_csv(dir / "synthetic_features.csv");
    set.labels = read_int_csv(dir / "synthetic_labels.csv");
    const auto meta = nlohmann::json::parse(read_file(dir / "synthetic_meta.json"));
    set.ipc = meta.at("ipc").get<int>();
    set.num_classes = meta.at("num_classes").get<int>();
    if (set.size() != set.ipc * set.num_classes)
        throw ParseError((dir / "synthetic_labels.csv").string(), 0,
                         "label count does not match ipc * num_classes");
    if (set.features.rows() != set.size())
        throw ParseError((dir / "synthetic_features.csv").string(), 0,
                         "feature row count does not match label count");
    return set;
}

}  // namespace tad
