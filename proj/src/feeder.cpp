#include "dgmod/feeder.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <set>

namespace dgmod {

namespace {

// Numeric-aware label ordering: numeric labels sort by value and come before
// non-numeric ones, which sort lexicographically. Keeps bus indexing stable
// no matter how the line list is permuted.
bool parse_number(const std::string& s, long long& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool label_less(const std::string& a, const std::string& b) {
    long long na = 0, nb = 0;
    const bool a_num = parse_number(a, na);
    const bool b_num = parse_number(b, nb);
    if (a_num && b_num) return na < nb || (na == nb && a < b);
    if (a_num != b_num) return a_num;
    return a < b;
}

}  // namespace

FeederModel FeederModel::build(const std::vector<LineSpec>& lines, double v0,
                               const std::string& root_label) {
    if (lines.empty()) throw ConfigError("feeder has no lines");
    if (!(v0 > 0.0) || !std::isfinite(v0)) throw ConfigError("reference voltage must be positive");

    // collect endpoints, reject self-loops and duplicate segments
    std::set<std::string> labels;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& ls : lines) {
        if (ls.from == ls.to) throw CycleDetected("self-loop at bus " + ls.from);
        labels.insert(ls.from);
        labels.insert(ls.to);
        auto key = std::minmax(ls.from, ls.to);
        if (!seen.insert(key).second)
            throw DuplicateLine("duplicate line between " + key.first + " and " + key.second);
    }

    const auto n_buses = labels.size();
    const auto n_lines = lines.size();
    if (n_lines >= n_buses) throw CycleDetected("line count implies a cycle");
    if (n_lines + 1 < n_buses) throw Disconnected("line count implies disconnected buses");

    // resolve the reference bus
    std::string root = root_label;
    if (root.empty()) {
        if (labels.count("0")) {
            root = "0";
        } else {
            std::set<std::string> never_to = labels;
            for (const auto& ls : lines) never_to.erase(ls.to);
            if (never_to.size() != 1)
                throw ConfigError("cannot infer the reference bus; give a root label");
            root = *never_to.begin();
        }
    } else if (!labels.count(root)) {
        throw ConfigError("root bus '" + root + "' not present in line list");
    }

    // assign ids: reference 0, the rest by sorted label
    std::vector<std::string> sorted;
    sorted.reserve(n_buses - 1);
    for (const auto& l : labels)
        if (l != root) sorted.push_back(l);
    std::sort(sorted.begin(), sorted.end(), label_less);

    FeederModel f;
    f.v0_ = v0;
    f.labels_.push_back(root);
    f.label_to_bus_[root] = 0;
    for (const auto& l : sorted) {
        f.label_to_bus_[l] = static_cast<int>(f.labels_.size());
        f.labels_.push_back(l);
    }
    const int N = static_cast<int>(n_buses) - 1;

    // undirected adjacency: bus -> (neighbor, input line index)
    std::vector<std::vector<std::pair<int, int>>> adj(N + 1);
    for (int k = 0; k < static_cast<int>(n_lines); ++k) {
        const int a = f.label_to_bus_[lines[k].from];
        const int b = f.label_to_bus_[lines[k].to];
        adj[a].push_back({b, k});
        adj[b].push_back({a, k});
    }

    // orient away from the root with a BFS
    f.parent_bus_.assign(N + 1, -2);
    f.parent_line_.assign(N + 1, 0);
    f.depth_.assign(N + 1, 0);
    f.children_.assign(N + 1, {});
    f.line_from_.assign(n_lines + 1, -1);
    f.line_to_.assign(n_lines + 1, -1);
    f.parent_bus_[0] = -1;
    std::deque<int> queue{0};
    f.topo_.clear();
    while (!queue.empty()) {
        const int n = queue.front();
        queue.pop_front();
        if (n != 0) f.topo_.push_back(n);
        for (auto [m, k] : adj[n]) {
            if (f.parent_bus_[m] != -2) continue;
            f.parent_bus_[m] = n;
            f.parent_line_[m] = k + 1;
            f.depth_[m] = f.depth_[n] + 1;
            f.children_[n].push_back(m);
            f.line_from_[k + 1] = n;
            f.line_to_[k + 1] = m;
            queue.push_back(m);
        }
    }
    if (static_cast<int>(f.topo_.size()) != N)
        throw Disconnected("feeder graph is not connected");

    // line parameters, validated
    f.r_.resize(n_lines);
    f.x_.resize(n_lines);
    for (std::size_t k = 0; k < n_lines; ++k) {
        const auto& ls = lines[k];
        if (!std::isfinite(ls.r) || !std::isfinite(ls.x))
            throw ConfigError("non-finite impedance on line " + ls.from + "-" + ls.to);
        if (!(ls.x > 0.0))
            throw NonPositiveReactance("line " + ls.from + "-" + ls.to + " has x <= 0");
        if (ls.r < 0.0) throw ConfigError("line " + ls.from + "-" + ls.to + " has r < 0");
        if (ls.z_ratio) {
            if (*ls.z_ratio < 0.0)
                throw ConfigError("line " + ls.from + "-" + ls.to + " has negative r-to-x ratio");
            if (std::abs(ls.r - *ls.z_ratio * ls.x) > 1e-12)
                throw ConfigError("line " + ls.from + "-" + ls.to +
                                  ": r does not match the declared r-to-x ratio");
        }
        f.r_(k) = ls.r;
        f.x_(k) = ls.x;
    }
    return f;
}

int FeederModel::bus(const std::string& label) const {
    auto it = label_to_bus_.find(label);
    if (it == label_to_bus_.end()) throw UnknownBusLabel("unknown bus label '" + label + "'");
    return it->second;
}

FeederModel FeederModel::with_parameters(const Eigen::VectorXd& r, const Eigen::VectorXd& x) const {
    if (r.size() != size() || x.size() != size())
        throw DimensionMismatch("parameter vectors do not match the line count");
    if (!r.allFinite() || !x.allFinite()) throw ConfigError("non-finite line parameters");
    FeederModel f = *this;
    f.r_ = r;
    f.x_ = x;
    return f;
}

Eigen::VectorXd FeederModel::subtree_sums(const Eigen::VectorXd& nodal) const {
    const int N = size();
    if (nodal.size() != N) throw DimensionMismatch("nodal vector has wrong length");
    Eigen::VectorXd acc = nodal;  // acc(n-1) accumulates the subtree of bus n
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
        const int n = *it;
        const int p = parent_bus_[n];
        if (p != 0) acc(p - 1) += acc(n - 1);
    }
    Eigen::VectorXd f(N);
    for (int l = 1; l <= N; ++l) f(l - 1) = acc(line_to_[l] - 1);
    return f;
}

Eigen::VectorXd FeederModel::path_sums(const Eigen::VectorXd& per_line) const {
    const int N = size();
    if (per_line.size() != N) throw DimensionMismatch("per-line vector has wrong length");
    Eigen::VectorXd v(N);
    for (int n : topo_) {
        const int p = parent_bus_[n];
        v(n - 1) = per_line(parent_line_[n] - 1) + (p == 0 ? 0.0 : v(p - 1));
    }
    return v;
}

int FeederModel::common_ancestor(int i, int j) const {
    while (depth_[i] > depth_[j]) i = parent_bus_[i];
    while (depth_[j] > depth_[i]) j = parent_bus_[j];
    while (i != j) {
        i = parent_bus_[i];
        j = parent_bus_[j];
    }
    return i;
}

Eigen::MatrixXd incidence(const FeederModel& feeder) {
    const int N = feeder.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
    for (int l = 1; l <= N; ++l) {
        m(feeder.to_bus(l) - 1, l - 1) = 1.0;
        if (feeder.from_bus(l) != 0) m(feeder.from_bus(l) - 1, l - 1) = -1.0;
    }
    return m;
}

SensitivityMatrices sensitivity_matrices(const FeederModel& feeder, const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& x) {
    const int N = feeder.size();
    if (r.size() != N || x.size() != N) throw DimensionMismatch("parameter vectors have wrong length");

    // cumulative parameter sums along each root path; entry (i,j) is the
    // cumulative value at the common ancestor
    const Eigen::VectorXd cum_r = feeder.path_sums(r);
    const Eigen::VectorXd cum_x = feeder.path_sums(x);
    SensitivityMatrices s;
    s.R.resize(N, N);
    s.X.resize(N, N);
    for (int i = 1; i <= N; ++i) {
        s.R(i - 1, i - 1) = cum_r(i - 1);
        s.X(i - 1, i - 1) = cum_x(i - 1);
        for (int j = i + 1; j <= N; ++j) {
            const int a = feeder.common_ancestor(i, j);
            const double vr = (a == 0) ? 0.0 : cum_r(a - 1);
            const double vx = (a == 0) ? 0.0 : cum_x(a - 1);
            s.R(i - 1, j - 1) = s.R(j - 1, i - 1) = vr;
            s.X(i - 1, j - 1) = s.X(j - 1, i - 1) = vx;
        }
    }

    // cross-check against the dense construction
    const Eigen::MatrixXd m = incidence(feeder);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    if (std::abs(lu.determinant()) < 1e-300)
        throw SingularIncidence("incidence matrix is numerically singular");
    const Eigen::MatrixXd minv = lu.solve(Eigen::MatrixXd::Identity(N, N));
    const Eigen::MatrixXd r_dense = minv.transpose() * r.asDiagonal() * minv;
    const Eigen::MatrixXd x_dense = minv.transpose() * x.asDiagonal() * minv;
    const double scale_r = std::max(1e-300, r_dense.cwiseAbs().maxCoeff());
    const double scale_x = std::max(1e-300, x_dense.cwiseAbs().maxCoeff());
    if ((s.R - r_dense).cwiseAbs().maxCoeff() > 1e-10 * scale_r ||
        (s.X - x_dense).cwiseAbs().maxCoeff() > 1e-10 * scale_x)
        throw NumericalError("sensitivity matrices fail the dense cross-check");
    return s;
}

SensitivityMatrices sensitivity_matrices(const FeederModel& feeder) {
    return sensitivity_matrices(feeder, feeder.resistance(), feeder.reactance());
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0)
        return std::numeric_limits<double>::infinity();
    return sv(0) / sv(sv.size() - 1);
}

}  // namespace dgmod
