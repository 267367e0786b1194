#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgmod/errors.hpp"

namespace dgmod {

/// One line segment of a radial feeder, as declared in input files.
/// Impedance is per unit; z_ratio, when present, must equal r/x.
struct LineSpec {
    std::string from;
    std::string to;
    double r = 0.0;
    double x = 0.0;
    std::optional<double> z_ratio;
};

/// Radial feeder as a rooted tree.
///
/// Internal ids: bus 0 is the reference; the N non-reference buses get ids
/// 1..N by sorted label order (numeric-aware), so bus indexing does not
/// depend on the order lines appear in the input. Lines keep input order,
/// ids 1..L, and are stored oriented away from the root (to_bus is the
/// downstream end). Nodal vectors are length N with slot n-1 for bus n;
/// per-line vectors are length L with slot l-1 for line l.
class FeederModel {
public:
    /// Validates and normalizes a line list into a rooted tree.
    /// root_label picks the reference bus; when empty, a bus labeled "0"
    /// is used, else the unique bus that never appears as a "to" endpoint.
    static FeederModel build(const std::vector<LineSpec>& lines, double v0 = 1.0,
                             const std::string& root_label = "");

    int size() const { return static_cast<int>(line_to_.size()) - 1; }  // N == L
    double v0() const { return v0_; }

    int parent(int bus) const { return parent_bus_[bus]; }
    int parent_line(int bus) const { return parent_line_[bus]; }
    int depth(int bus) const { return depth_[bus]; }
    int from_bus(int line) const { return line_from_[line]; }
    int to_bus(int line) const { return line_to_[line]; }
    bool is_leaf(int bus) const { return children_[bus].empty(); }
    const std::vector<int>& children(int bus) const { return children_[bus]; }

    /// Non-reference buses ordered parents-before-children.
    const std::vector<int>& topo_order() const { return topo_; }

    const Eigen::VectorXd& resistance() const { return r_; }
    const Eigen::VectorXd& reactance() const { return x_; }
    Eigen::VectorXd ratios() const { return (r_.array() / x_.array()).matrix(); }

    const std::string& label(int bus) const { return labels_[bus]; }
    bool has_bus(const std::string& label) const { return label_to_bus_.count(label) > 0; }
    int bus(const std::string& label) const;

    /// Same topology with replaced line parameters. Intended for estimated
    /// values, so only finiteness is checked (an estimate may come out
    /// nonpositive).
    FeederModel with_parameters(const Eigen::VectorXd& r, const Eigen::VectorXd& x) const;

    /// f(l) = sum of the nodal values over the subtree hanging off line l.
    /// This is the action of inv(M) on a nodal vector.
    Eigen::VectorXd subtree_sums(const Eigen::VectorXd& nodal) const;

    /// v(n) = sum of the per-line values along the root path of bus n.
    /// This is the action of inv(M)^T on a per-line vector.
    Eigen::VectorXd path_sums(const Eigen::VectorXd& per_line) const;

    /// Line ids on the common root path of buses i and j (i.e. the path down
    /// to their lowest common ancestor), as the ancestor bus id.
    int common_ancestor(int i, int j) const;

private:
    FeederModel() = default;

    double v0_ = 1.0;
    std::vector<std::string> labels_;              // bus id -> label
    std::unordered_map<std::string, int> label_to_bus_;
    std::vector<int> parent_bus_;                  // parent_bus_[0] = -1
    std::vector<int> parent_line_;                 // parent_line_[0] = 0 (unused)
    std::vector<int> line_from_, line_to_;         // line id -> bus ids, slot 0 unused
    std::vector<std::vector<int>> children_;       // bus id -> child bus ids
    std::vector<int> depth_;
    std::vector<int> topo_;                        // non-reference buses, parents first
    Eigen::VectorXd r_, x_;
};

/// Reduced incidence matrix M (N x L): +1 at the downstream (to) bus of each
/// line, -1 at the from bus when it is not the reference.
Eigen::MatrixXd incidence(const FeederModel& feeder);

struct SensitivityMatrices {
    Eigen::MatrixXd R;
    Eigen::MatrixXd X;
};

/// R and X with entry (i,j) equal to the accumulated line resistance
/// (reactance) along the common root path of buses i and j. Built by the
/// tree-path rule and cross-checked against the dense inv(M)^T diag inv(M)
/// product; disagreement beyond 1e-10 relative raises NumericalError.
SensitivityMatrices sensitivity_matrices(const FeederModel& feeder, const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& x);
SensitivityMatrices sensitivity_matrices(const FeederModel& feeder);

/// Ratio of the largest to smallest singular value.
double condition_number(const Eigen::MatrixXd& m);

}  // namespace dgmod
