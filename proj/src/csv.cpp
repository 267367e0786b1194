#include "dgmod/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dgmod/errors.hpp"

namespace dgmod {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
               const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(labels.size()) != values.cols())
        throw IoError("csv label count does not match the column count");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out << ',';
        out << labels[i];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out << ',';
            out << format_double(values(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed while writing " + path.string());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvTable t;
    t.labels = split_line(line);
    const std::size_t cols = t.labels.size();
    if (cols == 0) throw IoError(path.string() + " has an empty header");

    std::vector<double> data;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != cols)
            throw RaggedRows(path.string() + ": row " + std::to_string(rows + 2) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(cols));
        for (const auto& cell : cells) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw NonNumericCell(path.string() + ": cannot parse '" + cell + "' in row " +
                                     std::to_string(rows + 2));
            data.push_back(v);
        }
        ++rows;
    }
    t.values.resize(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t.values(r, c) = data[r * cols + c];
    return t;
}

}  // namespace dgmod
