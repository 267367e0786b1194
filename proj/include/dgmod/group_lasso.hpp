#pragma once

#include <Eigen/Dense>

namespace dgmod {

/// min_u ||c - B u||^2 + lambda * sum_g ||u_g||_2 with two-dimensional
/// groups: group g owns columns 2g and 2g+1 of B (an active/reactive pair).
struct GroupLassoProblem {
    Eigen::MatrixXd B;
    Eigen::VectorXd c;
    double lambda = 0.0;
};

struct GroupLassoResult {
    Eigen::VectorXd u;
    int sweeps = 0;
    bool converged = false;
};

double group_l1_norm(const Eigen::VectorXd& u);
double group_lasso_objective(const GroupLassoProblem& prob, const Eigen::VectorXd& u);

/// Shared design for solving the same B against many targets. Caches the
/// per-group 2x2 Gram eigendecompositions used by the exact group update.
class GroupLassoDesign {
public:
    GroupLassoDesign(Eigen::MatrixXd B, double lambda);

    int groups() const { return static_cast<int>(gram_d_.size()); }
    const Eigen::MatrixXd& design() const { return B_; }
    double lambda() const { return lambda_; }

    /// Block coordinate descent over groups in ascending index order until
    /// the largest coordinate change in a sweep falls below tol. A warm
    /// start may be supplied; BCD descends from it, so an unconverged
    /// return is still no worse than the start point.
    GroupLassoResult solve(const Eigen::VectorXd& c, double tol, int max_sweeps,
                           const Eigen::VectorXd* warm = nullptr) const;

private:
    Eigen::Vector2d update_group(int g, const Eigen::Vector2d& correlate) const;

    Eigen::MatrixXd B_;
    double lambda_;
    std::vector<Eigen::Vector2d> gram_d_;   // eigenvalues of B_g^T B_g
    std::vector<Eigen::Matrix2d> gram_q_;   // eigenvectors
};

GroupLassoResult group_lasso_solve(const GroupLassoProblem& prob, double tol = 1e-10,
                                   int max_sweeps = 500);

}  // namespace dgmod
