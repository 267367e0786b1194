#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dgmod/feeder.hpp"

namespace dgmod {

enum class ParamMode { Full, RatioFixed };

/// Line-parameter vector under estimation: [r; x] in Full mode, x alone in
/// RatioFixed mode with r recovered as ratios .* x.
struct ParamVector {
    ParamMode mode = ParamMode::RatioFixed;
    Eigen::VectorXd theta;
    Eigen::VectorXd ratios;  // RatioFixed only

    int params() const { return static_cast<int>(theta.size()); }
    int lines() const { return mode == ParamMode::Full ? params() / 2 : params(); }

    Eigen::VectorXd resistance() const {
        if (mode == ParamMode::Full) return theta.head(lines());
        return (ratios.array() * theta.array()).matrix();
    }
    Eigen::VectorXd reactance() const {
        if (mode == ParamMode::Full) return theta.tail(lines());
        return theta;
    }
};

/// Number of parameter columns for a mode on a given feeder.
inline int param_count(const FeederModel& feeder, ParamMode mode) {
    return mode == ParamMode::Full ? 2 * feeder.size() : feeder.size();
}

/// Per-timestep regression matrix A mapping line parameters to nodal voltage
/// differences: A(dp, dq) * theta reproduces R(r) dp + X(x) dq for every
/// parameter vector. Full mode returns N x 2L (columns [r-block, x-block]);
/// RatioFixed returns N x L and needs the per-line r-to-x ratios.
Eigen::MatrixXd assemble_regression(const FeederModel& feeder, const Eigen::VectorXd& dp,
                                    const Eigen::VectorXd& dq, ParamMode mode,
                                    const Eigen::VectorXd* ratios = nullptr);

/// Copy of a nodal vector with every entry outside `keep` zeroed.
Eigen::VectorXd mask_to(const Eigen::VectorXd& nodal, const std::vector<int>& keep);

/// Rows of a nodal-row matrix at the given bus ids.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& buses);
Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& buses);

/// Rank with singular values below rel_tol * sigma_max counted as zero.
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

}  // namespace dgmod
