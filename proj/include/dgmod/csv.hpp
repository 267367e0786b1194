#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace dgmod {

/// Rectangular CSV with a header row of column labels.
struct CsvTable {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;
};

/// Values are written with 17 significant digits so a read-back is
/// bit-identical.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
               const Eigen::MatrixXd& values);

/// Throws RaggedRows on uneven rows and NonNumericCell on parse failures.
CsvTable read_csv(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g

}  // namespace dgmod
