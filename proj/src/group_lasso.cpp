#include "dgmod/group_lasso.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dgmod/errors.hpp"

namespace dgmod {

double group_l1_norm(const Eigen::VectorXd& u) {
    double s = 0.0;
    for (Eigen::Index g = 0; 2 * g + 1 < u.size(); ++g) s += u.segment(2 * g, 2).norm();
    return s;
}

double group_lasso_objective(const GroupLassoProblem& prob, const Eigen::VectorXd& u) {
    return (prob.c - prob.B * u).squaredNorm() + prob.lambda * group_l1_norm(u);
}

GroupLassoDesign::GroupLassoDesign(Eigen::MatrixXd B, double lambda)
    : B_(std::move(B)), lambda_(lambda) {
    if (B_.cols() % 2 != 0) throw ConfigError("group-lasso design needs paired columns");
    if (lambda_ < 0.0) throw ConfigError("lambda must be non-negative");
    const int G = static_cast<int>(B_.cols()) / 2;
    gram_d_.resize(G);
    gram_q_.resize(G);
    for (int g = 0; g < G; ++g) {
        const Eigen::Matrix2d gram = B_.middleCols(2 * g, 2).transpose() * B_.middleCols(2 * g, 2);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(gram);
        gram_d_[g] = eig.eigenvalues().cwiseMax(0.0);
        gram_q_[g] = eig.eigenvectors();
    }
}

// Exact minimizer of ||rho - B_g u||^2 + lambda ||u||, given the correlate
// b = B_g^T rho. Zero when ||b|| <= lambda/2; otherwise u solves
// (B_g^T B_g + lambda/(2 m) I) u = b with m = ||u||, found by a safeguarded
// Newton iteration on the scalar norm equation.
Eigen::Vector2d GroupLassoDesign::update_group(int g, const Eigen::Vector2d& b) const {
    const double bnorm = b.norm();
    if (bnorm <= lambda_ / 2.0) return Eigen::Vector2d::Zero();

    const Eigen::Vector2d d = gram_d_[g];
    const Eigen::Vector2d beta = gram_q_[g].transpose() * b;

    if (lambda_ == 0.0) {
        // least squares on the group, minimal-norm when rank deficient
        Eigen::Vector2d y;
        const double cut = 1e-14 * std::max(d(0), d(1));
        for (int k = 0; k < 2; ++k) y(k) = d(k) > cut ? beta(k) / d(k) : 0.0;
        return gram_q_[g] * y;
    }

    // phi(m) = m - ||u(m)||, strictly one sign change on (0, inf)
    const auto norm_u = [&](double m) {
        const double shift = lambda_ / (2.0 * m);
        double s = 0.0;
        for (int k = 0; k < 2; ++k) {
            const double w = beta(k) / (d(k) + shift);
            s += w * w;
        }
        return std::sqrt(s);
    };

    double lo = 1e-14;
    double hi = std::max(2.0 * bnorm / lambda_, 1.0);
    while (hi - norm_u(hi) < 0.0 && hi < 1e30) hi *= 2.0;

    double m = std::min(std::max(norm_u(1.0), lo), hi);
    for (int it = 0; it < 200; ++it) {
        const double phi = m - norm_u(m);
        if (phi > 0.0)
            hi = m;
        else
            lo = m;
        if (std::abs(phi) <= 1e-12 * std::max(1.0, m) || hi - lo <= 1e-15 * hi) break;
        // Newton step with derivative by central difference on the smooth map
        const double h = 1e-7 * std::max(m, 1e-7);
        const double dphi = ((m + h - norm_u(m + h)) - (m - h - norm_u(m - h))) / (2.0 * h);
        double next = (dphi > 1e-12) ? m - phi / dphi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        m = next;
    }

    const double shift = lambda_ / (2.0 * m);
    Eigen::Vector2d y;
    for (int k = 0; k < 2; ++k) y(k) = beta(k) / (d(k) + shift);
    return gram_q_[g] * y;
}

GroupLassoResult GroupLassoDesign::solve(const Eigen::VectorXd& c, double tol, int max_sweeps,
                                         const Eigen::VectorXd* warm) const {
    const int G = groups();
    GroupLassoResult res;
    res.u = Eigen::VectorXd::Zero(2 * G);
    if (warm != nullptr && warm->size() == 2 * G) res.u = *warm;

    Eigen::VectorXd residual = c - B_ * res.u;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (int g = 0; g < G; ++g) {
            const auto Bg = B_.middleCols(2 * g, 2);
            const Eigen::Vector2d old_u = res.u.segment(2 * g, 2);
            const Eigen::Vector2d b = Bg.transpose() * residual + gram_q_[g] *
                                          (gram_d_[g].asDiagonal() * (gram_q_[g].transpose() * old_u));
            const Eigen::Vector2d new_u = update_group(g, b);
            const Eigen::Vector2d delta = new_u - old_u;
            if (delta != Eigen::Vector2d::Zero()) {
                residual -= Bg * delta;
                res.u.segment(2 * g, 2) = new_u;
            }
            max_change = std::max({max_change, std::abs(delta(0)), std::abs(delta(1))});
        }
        res.sweeps = sweep;
        if (max_change <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

GroupLassoResult group_lasso_solve(const GroupLassoProblem& prob, double tol, int max_sweeps) {
    if (prob.B.rows() != prob.c.size()) throw ConfigError("group-lasso target has wrong length");
    GroupLassoDesign design(prob.B, prob.lambda);
    return design.solve(prob.c, tol, max_sweeps);
}

}  // namespace dgmod
