#ifndef TAD_TESTS_HELPERS_HPP
#define TAD_TESTS_HELPERS_HPP

#include <unistd.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

namespace tad_test {

// Vector-level relative error ||a-b|| / max(||a||, ||b||).
inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max(a.norm(), b.norm());
    if (scale == 0.0) return (a - b).norm();
    return (a - b).norm() / scale;
}

// Entry-level relative error with an absolute floor against FD noise on
// near-zero entries.
inline double rel_err_entry(double a, double b, double floor_scale) {
    const double denom = std::max({std::abs(a), std::abs(b), floor_scale});
    if (denom == 0.0) return std::abs(a - b);
    return std::abs(a - b) / denom;
}

// Central finite differences of a scalar function over a flat vector.
inline Eigen::VectorXd central_fd(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& point, double step) {
    Eigen::VectorXd g(point.size());
    Eigen::VectorXd p = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double saved = p(i);
        p(i) = saved + step;
        const double hi = f(p);
        p(i) = saved - step;
        const double lo = f(p);
        p(i) = saved;
        g(i) = (hi - lo) / (2.0 * step);
    }
    return g;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        dir_ = std::filesystem::temp_directory_path() /
               ("tad_test_" + tag + "_" + std::to_string(counter++) + "_" +
                std::to_string(static_cast<unsigned>(::getpid())));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

}  // namespace tad_test

#endif  // TAD_TESTS_HELPERS_HPP
