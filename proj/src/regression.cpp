#include "dgmod/regression.hpp"

#include <Eigen/SVD>

namespace dgmod {

Eigen::MatrixXd assemble_regression(const FeederModel& feeder, const Eigen::VectorXd& dp,
                                    const Eigen::VectorXd& dq, ParamMode mode,
                                    const Eigen::VectorXd* ratios) {
    const int N = feeder.size();
    if (dp.size() != N || dq.size() != N)
        throw DimensionMismatch("injection difference vectors have wrong length");
    if (mode == ParamMode::RatioFixed && (ratios == nullptr || ratios->size() != N))
        throw MissingRatios("RatioFixed assembly needs per-line r-to-x ratios");

    // A(n, col(l)) is nonzero exactly when line l lies on the root path of
    // bus n; the value is the subtree flow of the respective difference.
    const Eigen::VectorXd fp = feeder.subtree_sums(dp);
    const Eigen::VectorXd fq = feeder.subtree_sums(dq);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N, param_count(feeder, mode));
    for (int n = 1; n <= N; ++n) {
        for (int b = n; b != 0; b = feeder.parent(b)) {
            const int l = feeder.parent_line(b);
            if (mode == ParamMode::Full) {
                a(n - 1, l - 1) = fp(l - 1);
                a(n - 1, N + l - 1) = fq(l - 1);
            } else {
                a(n - 1, l - 1) = (*ratios)(l - 1) * fp(l - 1) + fq(l - 1);
            }
        }
    }
    return a;
}

Eigen::VectorXd mask_to(const Eigen::VectorXd& nodal, const std::vector<int>& keep) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nodal.size());
    for (int n : keep) out(n - 1) = nodal(n - 1);
    return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& buses) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(buses.size()), m.cols());
    for (std::size_t i = 0; i < buses.size(); ++i) out.row(i) = m.row(buses[i] - 1);
    return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& buses) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) out(i) = v(buses[i] - 1);
    return out;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cut = rel_tol * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return rank;
}

}  // namespace dgmod
