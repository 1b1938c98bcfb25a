#include "tad/recalibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tad/csv.hpp"
#include "tad/errors.hpp"
#include "tad/rng.hpp"

namespace tad {

namespace {

void check_dim(const Embedder& e, Eigen::Index cols) {
    if (static_cast<int>(cols) != e.input_dim)
        throw ShapeError("embedder expects dim " + std::to_string(e.input_dim) + ", got " +
                         std::to_string(cols));
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

Embedder make_identity_embedder(int dim) {
    if (dim < 1) throw InvalidSpecError("embedder dim must be >= 1");
    Embedder e;
    e.kind = EmbedderKind::identity;
    e.input_dim = dim;
    e.output_dim = dim;
    return e;
}

Embedder make_projection_embedder(int input_dim, int output_dim, std::uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw InvalidSpecError("projection dims must be >= 1");
    Embedder e;
    e.kind = EmbedderKind::projection;
    e.input_dim = input_dim;
    e.output_dim = output_dim;
    e.projection.resize(output_dim, input_dim);
    Rng rng(derive_seed(seed, 7));
    const double scale = 1.0 / std::sqrt(static_cast<double>(output_dim));
    for (int i = 0; i < output_dim; ++i)
        for (int j = 0; j < input_dim; ++j) e.projection(i, j) = scale * rng.normal();
    return e;
}

Embedder fit_whitening_embedder(const Eigen::MatrixXd& fit_features) {
    if (fit_features.rows() < 2) throw InvalidSpecError("whitening needs >= 2 fit samples");
    Embedder e;
    e.kind = EmbedderKind::whitening;
    e.input_dim = static_cast<int>(fit_features.cols());
    e.output_dim = e.input_dim;
    e.mean = fit_features.colwise().mean();
    Eigen::VectorXd var(e.input_dim);
    for (int j = 0; j < e.input_dim; ++j)
        var(j) = (fit_features.col(j).array() - e.mean(j)).square().mean();
    e.inv_std = (var.array().max(kRidgeFloor)).rsqrt();
    return e;
}

Eigen::MatrixXd embed(const Embedder& e, const Eigen::MatrixXd& features) {
    check_dim(e, features.cols());
    switch (e.kind) {
        case EmbedderKind::identity:
            return features;
        case EmbedderKind::projection:
            return features * e.projection.transpose();
        case EmbedderKind::whitening: {
            Eigen::MatrixXd out = features.rowwise() - e.mean.transpose();
            out.array().rowwise() *= e.inv_std.transpose().array();
            return out;
        }
    }
    throw InvalidSpecError("unknown embedder kind");
}

std::vector<ClassGaussian> class_gaussians(const Eigen::MatrixXd& anchor_feats,
                                           const std::vector<int>& anchor_labels, int num_classes,
                                           double ridge_scale) {
    if (anchor_feats.rows() != static_cast<Eigen::Index>(anchor_labels.size()))
        throw ShapeError("anchor feature/label lengths differ");
    const int dim = static_cast<int>(anchor_feats.cols());

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < anchor_labels.size(); ++i) {
        const int c = anchor_labels[i];
        if (c < 0 || c >= num_classes) throw IndexError("anchor label " + std::to_string(c) + " out of range");
        by_class[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }

    std::vector<ClassGaussian> out;
    out.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        const auto& rows = by_class[static_cast<std::size_t>(c)];
        if (rows.empty()) throw EmptyClassError(c);
        ClassGaussian g;
        g.mean = Eigen::VectorXd::Zero(dim);
        for (const int r : rows) g.mean += anchor_feats.row(r).transpose();
        g.mean /= static_cast<double>(rows.size());

        g.diagonal = static_cast<int>(rows.size()) < dim + 1;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
        if (g.diagonal) {
            for (const int r : rows) {
                const Eigen::VectorXd d = anchor_feats.row(r).transpose() - g.mean;
                cov.diagonal() += d.cwiseProduct(d);
            }
        } else {
            for (const int r : rows) {
                const Eigen::VectorXd d = anchor_feats.row(r).transpose() - g.mean;
                cov.noalias() += d * d.transpose();
            }
        }
        cov /= static_cast<double>(rows.size());

        g.ridge = std::max(ridge_scale * cov.trace() / static_cast<double>(dim), kRidgeFloor);
        g.cov = cov + g.ridge * Eigen::MatrixXd::Identity(dim, dim);
        if (g.diagonal) {
            g.cov_inv = g.cov.diagonal().cwiseInverse().asDiagonal();
        } else {
            g.cov_inv = g.cov.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
        }
        if (!((g.cov * g.cov_inv - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() < 1e-6))
            throw NumericError("class " + std::to_string(c) + " covariance inverse failed validation", -1);
        out.push_back(std::move(g));
    }
    return out;
}

double mahalanobis(const Eigen::VectorXd& x, const ClassGaussian& g) {
    if (x.size() != g.mean.size())
        throw ShapeError("mahalanobis dim " + std::to_string(x.size()) + " != " +
                         std::to_string(g.mean.size()));
    const Eigen::VectorXd d = x - g.mean;
    const double q = d.dot(g.cov_inv * d);
    // Ridge-regularized covariance keeps the form positive; tiny negatives are
    // rounding from the solve.
    if (!std::isfinite(q)) throw NumericError("mahalanobis produced a non-finite value", -1);
    return std::sqrt(std::max(q, 0.0));
}

ReliabilityTable reliability_table(const Eigen::MatrixXd& trusted_feats,
                                   const std::vector<int>& working_labels,
                                   const std::vector<ClassGaussian>& gaussians, int top_k,
                                   bool weight_by_distance) {
    if (top_k < 1) throw InvalidSpecError("top_k must be >= 1");
    if (trusted_feats.rows() != static_cast<Eigen::Index>(working_labels.size()))
        throw ShapeError("trusted feature/label lengths differ");
    const int num_classes = static_cast<int>(gaussians.size());
    const auto n = working_labels.size();

    ReliabilityTable table;
    table.weight_by_distance = weight_by_distance;
    table.raw_distance.resize(n);
    table.normalized.resize(n);
    table.reliability.resize(n);
    table.in_topk.assign(n, false);
    table.topk.resize(static_cast<std::size_t>(num_classes));

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < n; ++i) {
        const int c = working_labels[i];
        if (c < 0 || c >= num_classes)
            throw IndexError("working label " + std::to_string(c) + " out of range");
        table.raw_distance[i] = mahalanobis(trusted_feats.row(static_cast<Eigen::Index>(i)).transpose(),
                                            gaussians[static_cast<std::size_t>(c)]);
        by_class[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }

    for (int c = 0; c < num_classes; ++c) {
        auto& rows = by_class[static_cast<std::size_t>(c)];
        if (rows.empty()) {
            table.empty_classes.push_back(c);
            continue;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const int r : rows) {
            lo = std::min(lo, table.raw_distance[static_cast<std::size_t>(r)]);
            hi = std::max(hi, table.raw_distance[static_cast<std::size_t>(r)]);
        }
        const double range = hi - lo;
        for (const int r : rows) {
            const auto i = static_cast<std::size_t>(r);
            // Zero range: every sample in the class counts as fully reliable.
            table.normalized[i] = range == 0.0 ? 0.0 : (table.raw_distance[i] - lo) / range;
            table.reliability[i] = 1.0 - table.normalized[i];
        }
        std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
            return table.reliability[static_cast<std::size_t>(a)] >
                   table.reliability[static_cast<std::size_t>(b)];
        });
        const auto keep = std::min<std::size_t>(rows.size(), static_cast<std::size_t>(top_k));
        table.topk[static_cast<std::size_t>(c)].assign(rows.begin(), rows.begin() + static_cast<long>(keep));
        for (const int r : table.topk[static_cast<std::size_t>(c)])
            table.in_topk[static_cast<std::size_t>(r)] = true;
    }
    return table;
}

PseudoLabel calibrate(const Eigen::VectorXd& x, const ReliabilityTable& table,
                      const Eigen::MatrixXd& trusted_feats, const std::vector<int>& working_labels) {
    const int num_classes = static_cast<int>(table.topk.size());
    bool any = false;
    PseudoLabel p;
    p.scores = Eigen::VectorXd::Zero(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        for (const int r : table.topk[static_cast<std::size_t>(c)]) {
            if (working_labels[static_cast<std::size_t>(r)] != c)
                throw InvalidSpecError("top-k table row labeled inconsistently with its class list");
            any = true;
            p.scores(c) += table.vote_weight(r) *
                           cosine(x, trusted_feats.row(static_cast<Eigen::Index>(r)).transpose());
        }
    }
    if (!any) throw NoReferenceError("every top-k reference list is empty");

    p.scores.maxCoeff(&p.argmax);
    double runner = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_classes; ++c)
        if (c != p.argmax) runner = std::max(runner, p.scores(c));
    const double top = p.scores(p.argmax);
    if (top <= 0.0)
        p.margin = 0.0;
    else if (runner <= 0.0)
        p.margin = std::numeric_limits<double>::infinity();
    else
        p.margin = top / runner;
    return p;
}

SieveRecallResult sieve_and_recall(const TrustPartition& part, const ReliabilityTable& table,
                                   const Eigen::MatrixXd& embedded_feats, double margin_gamma) {
    if (embedded_feats.rows() != static_cast<Eigen::Index>(part.working_labels.size()))
        throw ShapeError("feature rows do not match partition size");
    if (table.raw_distance.size() != part.trusted_idx.size())
        throw ShapeError("table was not built on this partition's trusted set");

    Eigen::MatrixXd trusted_feats(static_cast<Eigen::Index>(part.trusted_idx.size()),
                                  embedded_feats.cols());
    std::vector<int> trusted_labels(part.trusted_idx.size());
    for (std::size_t j = 0; j < part.trusted_idx.size(); ++j) {
        trusted_feats.row(static_cast<Eigen::Index>(j)) = embedded_feats.row(part.trusted_idx[j]);
        trusted_labels[j] = part.working_labels[static_cast<std::size_t>(part.trusted_idx[j])];
    }

    SieveRecallResult result;
    // Score first against the frozen table; apply every move afterwards.
    for (std::size_t j = 0; j < part.trusted_idx.size(); ++j) {
        if (table.in_topk[j]) continue;  // top-k members are exempt from the sieve
        const int i = part.trusted_idx[j];
        const PseudoLabel p = calibrate(embedded_feats.row(i).transpose(), table, trusted_feats,
                                        trusted_labels);
        const int label = part.working_labels[static_cast<std::size_t>(i)];
        if (p.argmax != label) result.demotions.push_back({i, false, label, label, p.margin});
    }
    for (const int i : part.untrusted_idx) {
        const PseudoLabel p = calibrate(embedded_feats.row(i).transpose(), table, trusted_feats,
                                        trusted_labels);
        if (p.margin >= margin_gamma) {
            result.promotions.push_back(
                {i, true, part.working_labels[static_cast<std::size_t>(i)], p.argmax, p.margin});
        }
    }

    TrustPartition next = part;
    std::vector<bool> trusted(static_cast<std::size_t>(part.size()), false);
    for (const int i : part.trusted_idx) trusted[static_cast<std::size_t>(i)] = true;
    for (const Move& m : result.demotions) trusted[static_cast<std::size_t>(m.sample)] = false;
    for (const Move& m : result.promotions) {
        trusted[static_cast<std::size_t>(m.sample)] = true;
        next.working_labels[static_cast<std::size_t>(m.sample)] = m.new_label;
    }
    next.trusted_idx.clear();
    next.untrusted_idx.clear();
    for (int i = 0; i < part.size(); ++i) {
        if (trusted[static_cast<std::size_t>(i)])
            next.trusted_idx.push_back(i);
        else
            next.untrusted_idx.push_back(i);
    }
    result.partition = std::move(next);
    return result;
}

void write_moves_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<int, Move>>& rows) {
    std::string out = "round,sample,direction,old_label,new_label,margin\n";
    for (const auto& [round, m] : rows) {
        out += std::to_string(round) + "," + std::to_string(m.sample) + "," +
               (m.promoted ? "promote" : "demote") + "," + std::to_string(m.old_label) + "," +
               std::to_string(m.new_label) + "," + format_double(m.margin) + "\n";
    }
    write_file(path, out);
}

}  // namespace tad
