#include "tad/diversion.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "tad/csv.hpp"
#include "tad/errors.hpp"

namespace tad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void check_losses(const std::vector<double>& losses) {
    if (losses.size() < 2) throw InvalidSpecError("fit_gmm2 needs at least 2 samples");
    for (const double l : losses)
        if (!std::isfinite(l)) throw InvalidSpecError("losses must be finite");
}

double log_normal_pdf(double x, double mu, double sigma2) {
    const double d = x - mu;
    return -0.5 * (kLogTwoPi + std::log(sigma2) + d * d / sigma2);
}

// Responsibilities of both components for one point, plus its log-likelihood.
struct PointPosterior {
    double gamma0;
    double gamma1;
    double loglik;
};

PointPosterior posterior_at(const GmmFit& fit, double x) {
    const double a0 = std::log(fit.pi[0]) + log_normal_pdf(x, fit.mu[0], fit.sigma2[0]);
    const double a1 = std::log(fit.pi[1]) + log_normal_pdf(x, fit.mu[1], fit.sigma2[1]);
    const double m = std::max(a0, a1);
    const double e0 = std::exp(a0 - m);
    const double e1 = std::exp(a1 - m);
    const double z = e0 + e1;
    return {e0 / z, e1 / z, m + std::log(z)};
}

GmmFit run_em(const std::vector<double>& losses, const GmmInit& init, double tol, int max_iter) {
    const auto n = losses.size();
    GmmFit fit;
    fit.pi = init.pi;
    fit.mu = init.mu;
    fit.sigma2 = {std::max(init.sigma2[0], kVarianceFloor), std::max(init.sigma2[1], kVarianceFloor)};

    std::vector<double> g0(n);
    for (int iter = 0; iter < max_iter; ++iter) {
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = posterior_at(fit, losses[i]);
            g0[i] = p.gamma0;
            loglik += p.loglik;
        }
        fit.loglik_history.push_back(loglik);
        if (fit.loglik_history.size() >= 2) {
            const auto h = fit.loglik_history.size();
            if (fit.loglik_history[h - 1] - fit.loglik_history[h - 2] < tol) break;
        }

        double n0 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            n0 += g0[i];
            s0 += g0[i] * losses[i];
            s1 += (1.0 - g0[i]) * losses[i];
        }
        const double n1 = static_cast<double>(n) - n0;
        // Responsibilities can underflow to zero under extreme separation;
        // floor the effective counts so the starved component keeps finite
        // parameters instead of poisoning the next E-step with log(0).
        const double n0s = std::max(n0, 1e-12);
        const double n1s = std::max(n1, 1e-12);
        fit.mu[0] = s0 / n0s;
        fit.mu[1] = s1 / n1s;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = losses[i] - fit.mu[0];
            const double d1 = losses[i] - fit.mu[1];
            v0 += g0[i] * d0 * d0;
            v1 += (1.0 - g0[i]) * d1 * d1;
        }
        fit.sigma2[0] = std::max(v0 / n0s, kVarianceFloor);
        fit.sigma2[1] = std::max(v1 / n1s, kVarianceFloor);
        fit.pi[0] = std::max(n0 / static_cast<double>(n), 1e-12);
        fit.pi[1] = std::max(n1 / static_cast<double>(n), 1e-12);
        const double pz = fit.pi[0] + fit.pi[1];
        fit.pi[0] /= pz;
        fit.pi[1] /= pz;
    }
    fit.trusted_component = fit.mu[0] <= fit.mu[1] ? 0 : 1;
    return fit;
}

}  // namespace

GmmFit fit_gmm2(const std::vector<double>& losses, const GmmInit& init, double tol, int max_iter) {
    check_losses(losses);
    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    if (*lo == *hi) {
        GmmFit fit;
        fit.pi = {0.5, 0.5};
        fit.mu = {*lo, *lo};
        fit.sigma2 = {kVarianceFloor, kVarianceFloor};
        fit.degenerate = true;
        fit.trusted_component = 0;
        double loglik = 0.0;
        for (const double l : losses) loglik += posterior_at(fit, l).loglik;
        fit.loglik_history.push_back(loglik);
        return fit;
    }
    return run_em(losses, init, tol, max_iter);
}

GmmFit fit_gmm2(const std::vector<double>& losses, double tol, int max_iter) {
    check_losses(losses);
    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    double mean = 0.0;
    for (const double l : losses) mean += l;
    mean /= static_cast<double>(losses.size());
    double var = 0.0;
    for (const double l : losses) var += (l - mean) * (l - mean);
    var /= static_cast<double>(losses.size());
    GmmInit init{{0.5, 0.5}, {*lo, *hi}, {var, var}};
    return fit_gmm2(losses, init, tol, max_iter);
}

std::vector<double> confidences(const GmmFit& fit, const std::vector<double>& losses) {
    std::vector<double> w(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const auto p = posterior_at(fit, losses[i]);
        w[i] = fit.trusted_component == 0 ? p.gamma0 : p.gamma1;
    }
    return w;
}

std::vector<double> class_thresholds(const std::vector<double>& w, const std::vector<int>& labels,
                                     int num_classes) {
    if (w.size() != labels.size()) throw ShapeError("confidence/label lengths differ");
    std::vector<double> sum(static_cast<std::size_t>(num_classes), 0.0);
    std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= num_classes)
            throw IndexError("label " + std::to_string(c) + " out of range");
        sum[static_cast<std::size_t>(c)] += w[i];
        ++count[static_cast<std::size_t>(c)];
    }
    std::vector<double> tau(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) throw EmptyClassError(c);
        tau[static_cast<std::size_t>(c)] =
            sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
    }
    return tau;
}

bool TrustPartition::is_trusted(int i) const {
    return std::binary_search(trusted_idx.begin(), trusted_idx.end(), i);
}

TrustPartition partition(const std::vector<double>& w, const std::vector<int>& labels,
                         const std::vector<double>& thresholds) {
    if (w.size() != labels.size()) throw ShapeError("confidence/label lengths differ");
    TrustPartition part;
    part.confidences = w;
    part.thresholds = thresholds;
    part.working_labels = labels;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= static_cast<int>(thresholds.size()))
            throw IndexError("label " + std::to_string(c) + " has no threshold");
        if (w[i] >= thresholds[static_cast<std::size_t>(c)])
            part.trusted_idx.push_back(static_cast<int>(i));
        else
            part.untrusted_idx.push_back(static_cast<int>(i));
    }
    return part;
}

void save_gmm(const std::filesystem::path& path, const GmmFit& fit) {
    nlohmann::json j;
    j["pi"] = fit.pi;
    j["mu"] = fit.mu;
    j["sigma2"] = fit.sigma2;
    j["trusted_component"] = fit.trusted_component;
    j["loglik_history"] = fit.loglik_history;
    j["degenerate"] = fit.degenerate;
    write_file(path, j.dump(2) + "\n");
}

GmmFit load_gmm(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(read_file(path));
    GmmFit fit;
    fit.pi = j.at("pi").get<std::array<double, 2>>();
    fit.mu = j.at("mu").get<std::array<double, 2>>();
    fit.sigma2 = j.at("sigma2").get<std::array<double, 2>>();
    fit.trusted_component = j.at("trusted_component").get<int>();
    fit.loglik_history = j.at("loglik_history").get<std::vector<double>>();
    fit.degenerate = j.at("degenerate").get<bool>();
    return fit;
}

void save_partition(const std::filesystem::path& path, const TrustPartition& part) {
    nlohmann::json j;
    j["confidences"] = part.confidences;
    j["thresholds"] = part.thresholds;
    j["trusted_idx"] = part.trusted_idx;
    j["untrusted_idx"] = part.untrusted_idx;
    j["working_labels"] = part.working_labels;
    write_file(path, j.dump(2) + "\n");
}

TrustPartition load_partition(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(read_file(path));
    TrustPartition part;
    part.confidences = j.at("confidences").get<std::vector<double>>();
    part.thresholds = j.at("thresholds").get<std::vector<double>>();
    part.trusted_idx = j.at("trusted_idx").get<std::vector<int>>();
    part.untrusted_idx = j.at("untrusted_idx").get<std::vector<int>>();
    part.working_labels = j.at("working_labels").get<std::vector<int>>();
    return part;
}

}  // namespace tad
