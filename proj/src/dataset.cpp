#include "tad/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

namespace {

void validate(const BlobSpec& spec) {
    if (spec.num_classes < 1) throw InvalidSpecError("num_classes must be >= 1");
    if (spec.samples_per_class < 1) throw InvalidSpecError("samples_per_class must be >= 1");
    if (spec.dim < 1) throw InvalidSpecError("dim must be >= 1");
    if (spec.within_class_stddev <= 0.0) throw InvalidSpecError("within_class_stddev must be > 0");
}

void validate(const NoiseSpec& spec, int num_classes) {
    if (spec.ratio < 0.0 || spec.ratio > 1.0) throw InvalidSpecError("noise ratio must be in [0,1]");
    if (spec.kind == NoiseKind::symmetric) {
        if (!spec.class_map.empty()) throw InvalidSpecError("symmetric noise takes no class_map");
        if (num_classes < 2 && spec.ratio > 0.0)
            throw InvalidSpecError("symmetric noise needs at least 2 classes");
    } else {
        if (spec.class_map.empty()) throw InvalidSpecError("asymmetric noise requires a class_map");
        for (const auto& [src, dst] : spec.class_map) {
            if (src == dst) throw InvalidSpecError("class_map maps class " + std::to_string(src) + " to itself");
            if (src < 0 || src >= num_classes || dst < 0 || dst >= num_classes)
                throw InvalidSpecError("class_map entry " + std::to_string(src) + "->" + std::to_string(dst) +
                                       " outside [0," + std::to_string(num_classes) + ")");
        }
    }
}

}  // namespace

LabeledDataset make_blobs(const BlobSpec& spec) {
    validate(spec);
    // Separate streams so center placement is independent of sample count.
    Rng center_rng(derive_seed(spec.seed, 1));
    Rng sample_rng(derive_seed(spec.seed, 2));

    Eigen::MatrixXd centers(spec.num_classes, spec.dim);
    for (int c = 0; c < spec.num_classes; ++c)
        for (int d = 0; d < spec.dim; ++d) centers(c, d) = spec.class_center_scale * center_rng.normal();

    const int n = spec.num_classes * spec.samples_per_class;
    LabeledDataset ds;
    ds.num_classes = spec.num_classes;
    ds.features.resize(n, spec.dim);
    ds.labels.resize(n);
    int row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
            for (int d = 0; d < spec.dim; ++d)
                ds.features(row, d) = centers(c, d) + spec.within_class_stddev * sample_rng.normal();
            ds.labels[row] = c;
        }
    }
    return ds;
}

NoisyDataset inject_noise(const LabeledDataset& ds, const NoiseSpec& spec) {
    validate(spec, ds.num_classes);
    NoisyDataset out;
    out.base = ds;
    out.noise_spec = spec;
    NoisyDataset::EvalView eval;
    eval.clean_labels = ds.labels;
    eval.flip_mask.assign(ds.labels.size(), false);

    Rng rng(derive_seed(spec.seed, 3));
    const int c_count = ds.num_classes;
    for (int i = 0; i < ds.size(); ++i) {
        const int y = ds.labels[i];
        if (spec.kind == NoiseKind::symmetric) {
            if (rng.uniform() < spec.ratio) {
                // Uniform over the C-1 wrong classes; never the original label.
                int target = static_cast<int>(rng.integer(static_cast<std::uint64_t>(c_count - 1)));
                if (target >= y) ++target;
                out.base.labels[i] = target;
            }
        } else {
            auto it = spec.class_map.find(y);
            if (it != spec.class_map.end() && rng.uniform() < spec.ratio) out.base.labels[i] = it->second;
        }
        eval.flip_mask[i] = out.base.labels[i] != y;
    }
    out.eval = std::move(eval);
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds, int train_per_class,
                                                           int test_per_class) {
    const int per_class = train_per_class + test_per_class;
    if (ds.size() != per_class * ds.num_classes)
        throw InvalidSpecError("split sizes do not match dataset size");
    LabeledDataset train, test;
    train.num_classes = test.num_classes = ds.num_classes;
    train.features.resize(train_per_class * ds.num_classes, ds.dim());
    test.features.resize(test_per_class * ds.num_classes, ds.dim());
    for (int c = 0; c < ds.num_classes; ++c) {
        const int base = c * per_class;
        for (int s = 0; s < train_per_class; ++s) {
            const int src = base + s;
            if (ds.labels[src] != c) throw InvalidSpecError("split requires class-major layout");
            train.features.row(c * train_per_class + s) = ds.features.row(src);
            train.labels.push_back(c);
        }
        for (int s = 0; s < test_per_class; ++s) {
            const int src = base + train_per_class + s;
            if (ds.labels[src] != c) throw InvalidSpecError("split requires class-major layout");
            test.features.row(c * test_per_class + s) = ds.features.row(src);
            test.labels.push_back(c);
        }
    }
    return {std::move(train), std::move(test)};
}

void save_dataset(const std::filesystem::path& dir, const NoisyDataset& ds) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir / "features.csv", ds.base.features);
    write_int_csv(dir / "labels.csv", ds.base.labels);
    if (ds.eval) {
        write_int_csv(dir / "clean_labels.csv", ds.eval->clean_labels);
        std::vector<int> mask(ds.eval->flip_mask.size());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = ds.eval->flip_mask[i] ? 1 : 0;
        write_int_csv(dir / "flip_mask.csv", mask);
    }
    nlohmann::json meta;
    meta["num_classes"] = ds.base.num_classes;
    meta["dim"] = ds.base.dim();
    meta["noise"] = {{"kind", ds.noise_spec.kind == NoiseKind::symmetric ? "symmetric" : "asymmetric"},
                     {"ratio", ds.noise_spec.ratio},
                     {"seed", ds.noise_spec.seed}};
    if (!ds.noise_spec.class_map.empty()) {
        nlohmann::json map = nlohmann::json::object();
        for (const auto& [src, dst] : ds.noise_spec.class_map) map[std::to_string(src)] = dst;
        meta["noise"]["class_map"] = map;
    }
    write_file(dir / "meta.json", meta.dump(2) + "\n");
}

NoisyDataset load_dataset(const std::filesystem::path& dir) {
    NoisyDataset ds;
    ds.base.features = read_matrix_csv(dir / "features.csv");
    ds.base.labels = read_int_csv(dir / "labels.csv");
    const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
    ds.base.num_classes = meta.at("num_classes").get<int>();
    const auto& noise = meta.at("noise");
    ds.noise_spec.kind = noise.at("kind").get<std::string>() == "symmetric" ? NoiseKind::symmetric
                                                                            : NoiseKind::asymmetric;
    ds.noise_spec.ratio = noise.at("ratio").get<double>();
    ds.noise_spec.seed = noise.at("seed").get<std::uint64_t>();
    if (noise.contains("class_map"))
        for (const auto& [k, v] : noise.at("class_map").items()) ds.noise_spec.class_map[std::stoi(k)] = v.get<int>();
    if (std::filesystem::exists(dir / "clean_labels.csv")) {
        NoisyDataset::EvalView eval;
        eval.clean_labels = read_int_csv(dir / "clean_labels.csv");
        for (int m : read_int_csv(dir / "flip_mask.csv")) eval.flip_mask.push_back(m != 0);
        ds.eval = std::move(eval);
    }
    return ds;
}

}  // namespace tad
