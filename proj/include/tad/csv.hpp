#ifndef TAD_CSV_HPP
#define TAD_CSV_HPP

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace tad {

// Full round-trip precision for double columns.
std::string format_double(double v);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

void write_int_csv(const std::filesystem::path& path, const std::vector<int>& v);
std::vector<int> read_int_csv(const std::filesystem::path& path);

// Plain text file helpers used for byte-level artifact comparisons.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tad

#endif  // TAD_CSV_HPP
