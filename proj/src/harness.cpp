#include "tad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

namespace {

// Loop-seed streams; cfg.seed is the base everywhere.
constexpr std::uint64_t kStreamExpert = 20;   // +round, index = expert id
constexpr std::uint64_t kStreamAnchors = 40;  // +round
constexpr std::uint64_t kStreamFinalInit = 60;
constexpr std::uint64_t kStreamFinalDistill = 61;
constexpr std::uint64_t kStreamStudent = 70;  // index = repeat

void validate(const DualLoopConfig& cfg) {
    if (cfg.rounds < 0) throw InvalidSpecError("rounds must be >= 0");
    if (cfg.num_experts < 1) throw InvalidSpecError("num_experts must be >= 1");
    if (cfg.ipc < 1) throw InvalidSpecError("ipc must be >= 1");
    if (cfg.eval_repeats < 1) throw InvalidSpecError("eval_repeats must be >= 1");
    if (cfg.loss_window_lo < 0 || cfg.loss_window_hi < cfg.loss_window_lo)
        throw InvalidSpecError("loss window must satisfy 0 <= lo <= hi");
    if (cfg.loss_window_lo > cfg.expert.epochs)
        throw InvalidSpecError("loss window starts past the last expert epoch");
    if (cfg.recal.top_k < 1) throw InvalidSpecError("top_k must be >= 1");
    if (cfg.recal.recall_margin <= 1.0)
        throw InvalidSpecError("recall_margin must exceed 1 (top/runner-up ratio)");
    if (cfg.recal.anchor_ipc < 1) throw InvalidSpecError("anchor_ipc must be >= 1");
    if (cfg.recal.embedder == EmbedderKind::projection && cfg.recal.embed_dim < 1)
        throw InvalidSpecError("projection embedder needs embed_dim >= 1");
}

std::vector<Trajectory> train_experts(const DatasetView& view, const DualLoopConfig& cfg, int round) {
    std::vector<Trajectory> experts;
    experts.reserve(static_cast<std::size_t>(cfg.num_experts));
    for (int e = 0; e < cfg.num_experts; ++e) {
        TrainHyper hyper = cfg.expert;
        hyper.seed = derive_seed(cfg.seed, kStreamExpert + static_cast<std::uint64_t>(round),
                                 static_cast<std::uint64_t>(e));
        experts.push_back(train(view, hyper, true));
    }
    return experts;
}

// Mean CE per sample over the loss window epochs, averaged over all experts.
std::vector<double> window_losses(const std::vector<Trajectory>& experts, const DatasetView& view,
                                  const DualLoopConfig& cfg) {
    std::vector<double> acc(static_cast<std::size_t>(view.size()), 0.0);
    int terms = 0;
    for (const auto& expert : experts) {
        const int last = static_cast<int>(expert.checkpoints.size()) - 1;
        const int lo = std::min(cfg.loss_window_lo, last);
        const int hi = std::min(cfg.loss_window_hi, last);
        for (int e = lo; e <= hi; ++e) {
            ParamVector params{expert.checkpoints[static_cast<std::size_t>(e)], expert.shape};
            const auto losses = per_sample_losses(params, view);
            for (std::size_t i = 0; i < losses.size(); ++i) acc[i] += losses[i];
            ++terms;
        }
    }
    for (auto& v : acc) v /= static_cast<double>(terms);
    return acc;
}

DatasetView trusted_view(const Eigen::MatrixXd& features, const TrustPartition& part, int num_classes) {
    DatasetView view;
    view.features = &features;
    view.num_classes = num_classes;
    view.indices = part.trusted_idx;
    view.labels.reserve(part.trusted_idx.size());
    for (const int i : part.trusted_idx)
        view.labels.push_back(part.working_labels[static_cast<std::size_t>(i)]);
    return view;
}

Embedder build_embedder(const RecalConfig& recal, const Eigen::MatrixXd& train_features) {
    switch (recal.embedder) {
        case EmbedderKind::identity:
            return make_identity_embedder(static_cast<int>(train_features.cols()));
        case EmbedderKind::projection:
            return make_projection_embedder(static_cast<int>(train_features.cols()), recal.embed_dim,
                                            recal.embed_seed);
        case EmbedderKind::whitening:
            return fit_whitening_embedder(train_features);
    }
    throw InvalidSpecError("unknown embedder kind");
}

DistillSpec anchor_spec(const DualLoopConfig& cfg) {
    DistillSpec spec = cfg.distill;
    spec.outer_iterations = cfg.recal.anchor_iterations;
    spec.dump_step_losses = false;
    return spec;
}

TrustPartition all_trusted_partition(const LabeledDataset& base) {
    TrustPartition part;
    part.confidences.assign(static_cast<std::size_t>(base.size()), 1.0);
    part.thresholds.assign(static_cast<std::size_t>(base.num_classes), 0.0);
    part.working_labels = base.labels;
    part.trusted_idx.resize(static_cast<std::size_t>(base.size()));
    for (int i = 0; i < base.size(); ++i) part.trusted_idx[static_cast<std::size_t>(i)] = i;
    return part;
}

}  // namespace

PartitionMetrics partition_metrics(const TrustPartition& part, const std::vector<bool>& flip_mask) {
    if (flip_mask.size() != part.working_labels.size())
        throw ShapeError("flip mask length does not match partition size");
    int clean = 0, trusted = 0, both = 0;
    std::vector<bool> is_trusted(flip_mask.size(), false);
    for (const int i : part.trusted_idx) is_trusted[static_cast<std::size_t>(i)] = true;
    for (std::size_t i = 0; i < flip_mask.size(); ++i) {
        if (!flip_mask[i]) ++clean;
        if (is_trusted[i]) ++trusted;
        if (!flip_mask[i] && is_trusted[i]) ++both;
    }
    PartitionMetrics m;
    m.empty_trusted = trusted == 0;
    m.precision = trusted == 0 ? 0.0 : static_cast<double>(both) / trusted;
    m.recall = clean == 0 ? 0.0 : static_cast<double>(both) / clean;
    m.f1 = m.precision + m.recall == 0.0 ? 0.0
                                         : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

StudentEval evaluate_student(const SyntheticSet& synthetic, const LabeledDataset& test,
                             const TrainHyper& hyper, int repeats) {
    if (repeats < 1) throw InvalidSpecError("repeats must be >= 1");
    if (synthetic.size() == 0) throw EmptyTrainingSetError("synthetic set is empty");

    DatasetView view;
    view.features = &synthetic.features;
    view.num_classes = synthetic.num_classes;
    view.indices.resize(static_cast<std::size_t>(synthetic.size()));
    for (int i = 0; i < synthetic.size(); ++i) view.indices[static_cast<std::size_t>(i)] = i;
    view.labels = synthetic.labels;

    StudentEval eval;
    eval.accuracies.reserve(static_cast<std::size_t>(repeats));
    for (int j = 0; j < repeats; ++j) {
        TrainHyper h = hyper;
        h.seed = derive_seed(hyper.seed, kStreamStudent, static_cast<std::uint64_t>(j));
        const Trajectory traj = train(view, h, false);
        ParamVector params{traj.checkpoints.back(), traj.shape};
        eval.accuracies.push_back(accuracy(params, test));
    }
    eval.mean = 0.0;
    for (const double a : eval.accuracies) eval.mean += a;
    eval.mean /= static_cast<double>(repeats);
    double var = 0.0;
    for (const double a : eval.accuracies) var += (a - eval.mean) * (a - eval.mean);
    eval.stddev = std::sqrt(var / static_cast<double>(repeats));
    return eval;
}

TadResult run_dual_loop(const NoisyDataset& ds, const DualLoopConfig& cfg, const LabeledDataset* test) {
    validate(cfg);
    if (ds.base.size() == 0) throw EmptyTrainingSetError("dataset is empty");

    TadResult result;
    result.baseline = cfg.rounds == 0;

    // Round 0: warm-up experts on all noisy data under the regularized loss.
    DatasetView all = noisy_view(ds);
    std::vector<Trajectory> experts = train_experts(all, cfg, 0);

    TrustPartition part = all_trusted_partition(ds.base);
    const Embedder embedder = build_embedder(cfg.recal, ds.base.features);
    Eigen::MatrixXd embedded;  // lazily built, rounds only
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (int round = 1; round <= cfg.rounds; ++round) {
        // Outer loop: GMM over windowed losses under current working labels.
        DatasetView working = all;
        working.labels = part.working_labels;
        const std::vector<double> losses = window_losses(experts, working, cfg);
        const GmmFit gmm = fit_gmm2(losses);
        const std::vector<double> w = confidences(gmm, losses);
        const std::vector<double> tau = class_thresholds(w, part.working_labels, ds.base.num_classes);
        TrustPartition outer = partition(w, part.working_labels, tau);
        if (outer.trusted_idx.empty())
            throw EmptyTrainingSetError(
                "round " + std::to_string(round) + " produced an empty trusted set (gmm mu = {" +
                format_double(gmm.mu[0]) + ", " + format_double(gmm.mu[1]) + "}, pi = {" +
                format_double(gmm.pi[0]) + ", " + format_double(gmm.pi[1]) + "})");
        result.final_gmm = gmm;

        // Inner loop: anchors, reliability geometry, sieve/recall.
        const SyntheticSet anchors =
            synthesize_anchors(experts, trusted_view(ds.base.features, outer, ds.base.num_classes),
                               cfg.recal.anchor_ipc, anchor_spec(cfg),
                               derive_seed(cfg.seed, kStreamAnchors + static_cast<std::uint64_t>(round)));
        if (embedded.size() == 0) embedded = embed(embedder, ds.base.features);
        const auto gaussians = class_gaussians(embed(embedder, anchors.features), anchors.labels,
                                               anchors.num_classes, cfg.recal.ridge_scale);
        Eigen::MatrixXd trusted_feats(static_cast<Eigen::Index>(outer.trusted_idx.size()),
                                      embedded.cols());
        std::vector<int> trusted_labels(outer.trusted_idx.size());
        for (std::size_t j = 0; j < outer.trusted_idx.size(); ++j) {
            trusted_feats.row(static_cast<Eigen::Index>(j)) = embedded.row(outer.trusted_idx[j]);
            trusted_labels[j] = outer.working_labels[static_cast<std::size_t>(outer.trusted_idx[j])];
        }
        const ReliabilityTable table = reliability_table(trusted_feats, trusted_labels, gaussians,
                                                         cfg.recal.top_k, cfg.recal.weight_by_distance);
        SieveRecallResult srr = sieve_and_recall(outer, table, embedded, cfg.recal.recall_margin);
        part = std::move(srr.partition);

        RoundRecord rec;
        rec.round = round;
        rec.trusted_count = static_cast<int>(part.trusted_idx.size());
        rec.promotions = static_cast<int>(srr.promotions.size());
        rec.demotions = static_cast<int>(srr.demotions.size());
        rec.gmm_mu1 = gmm.mu[static_cast<std::size_t>(gmm.trusted_component)];
        rec.gmm_mu2 = gmm.mu[static_cast<std::size_t>(1 - gmm.trusted_component)];
        if (ds.eval) {
            const PartitionMetrics m = partition_metrics(part, ds.eval->flip_mask);
            rec.precision = m.precision;
            rec.recall = m.recall;
            rec.f1 = m.f1;
        } else {
            rec.precision = rec.recall = rec.f1 = nan;
        }
        result.history.push_back(rec);
        for (const Move& m : srr.demotions) result.moves.push_back({round, m});
        for (const Move& m : srr.promotions) result.moves.push_back({round, m});

        // Fresh experts on the updated trusted set for the next round.
        experts = train_experts(trusted_view(ds.base.features, part, ds.base.num_classes), cfg, round);
    }

    // Final distillation on the working set (trusted plus recalled samples).
    const DatasetView final_view =
        cfg.rounds == 0 ? all : trusted_view(ds.base.features, part, ds.base.num_classes);
    const SyntheticSet init =
        init_synthetic(final_view, cfg.ipc, derive_seed(cfg.seed, kStreamFinalInit));
    DistillResult dres =
        distill(experts, init, cfg.distill, derive_seed(cfg.seed, kStreamFinalDistill));
    result.synthetic = std::move(dres.synthetic);
    result.distill_log = std::move(dres.log);
    result.distill_step_losses = std::move(dres.step_losses);
    result.final_partition = std::move(part);

    if (test) result.eval = evaluate_student(result.synthetic, *test, cfg.student, cfg.eval_repeats);
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<RoundRecord>& history) {
    std::string out = "round,trusted_count,promotions,demotions,gmm_mu1,gmm_mu2,precision,recall,f1\n";
    for (const auto& r : history) {
        out += std::to_string(r.round) + "," + std::to_string(r.trusted_count) + "," +
               std::to_string(r.promotions) + "," + std::to_string(r.demotions) + "," +
               format_double(r.gmm_mu1) + "," + format_double(r.gmm_mu2) + "," +
               format_double(r.precision) + "," + format_double(r.recall) + "," +
               format_double(r.f1) + "\n";
    }
    write_file(path, out);
}

std::vector<RoundRecord> read_history_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<RoundRecord> rows;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (lineno == 1 || line.empty()) continue;  // header
        std::vector<double> fields;
        std::size_t fpos = 0;
        while (fpos <= line.size()) {
            auto comma = line.find(',', fpos);
            if (comma == std::string::npos) comma = line.size();
            const std::string f = line.substr(fpos, comma - fpos);
            char* end = nullptr;
            fields.push_back(std::strtod(f.c_str(), &end));
            if (end == f.c_str())
                throw ParseError(path.string(), lineno, "bad numeric field '" + f + "'");
            fpos = comma + 1;
        }
        if (fields.size() != 9)
            throw ParseError(path.string(), lineno, "expected 9 fields, got " +
                                                        std::to_string(fields.size()));
        RoundRecord r;
        r.round = static_cast<int>(fields[0]);
        r.trusted_count = static_cast<int>(fields[1]);
        r.promotions = static_cast<int>(fields[2]);
        r.demotions = static_cast<int>(fields[3]);
        r.gmm_mu1 = fields[4];
        r.gmm_mu2 = fields[5];
        r.precision = fields[6];
        r.recall = fields[7];
        r.f1 = fields[8];
        rows.push_back(r);
    }
    return rows;
}

}  // namespace tad
