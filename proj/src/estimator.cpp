#include "dgmod/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "dgmod/rng.hpp"

namespace dgmod {

namespace {

// static contiguous split of [0, count) into at most `threads` chunks;
// partial results are combined in chunk order so a fixed thread count gives
// a fixed accumulation order
template <typename Work>
void parallel_chunks(int count, int threads, Work&& work) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        work(0, 0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const int base = count / threads;
    const int extra = count % threads;
    int begin = 0;
    for (int k = 0; k < threads; ++k) {
        const int len = base + (k < extra ? 1 : 0);
        pool.emplace_back([&work, k, begin, len] { work(k, begin, begin + len); });
        begin += len;
    }
    for (auto& th : pool) th.join();
}

std::vector<int> all_steps(int T) {
    std::vector<int> v(T);
    for (int t = 0; t < T; ++t) v[t] = t;
    return v;
}

}  // namespace

EstimationProblem::EstimationProblem(const FeederModel& feeder, const DifferenceDataset& dataset,
                                     ParamMode mode, Eigen::VectorXd ratios)
    : feeder_(&feeder), mode_(mode), ratios_(std::move(ratios)) {
    const int N = feeder.size();
    if (dataset.dv.cols() != N || dataset.dp.cols() != N || dataset.dq.cols() != N)
        throw DimensionMismatch("dataset does not match the feeder size");
    if (mode_ == ParamMode::RatioFixed) {
        if (ratios_.size() == 0) ratios_ = feeder.ratios();
        if (ratios_.size() != N) throw MissingRatios("need one r-to-x ratio per line");
        if ((ratios_.array() < 0.0).any()) throw MissingRatios("r-to-x ratios must be >= 0");
    }
    rows_ = dataset.partition.voltage_observed;
    u_nodes_ = dataset.partition.unobserved;
    if (rows_.empty()) throw EmptyObservedSet("no metered voltage rows");

    const auto& obs = dataset.partition.observed;
    dp_obs_.setZero(dataset.steps(), N);
    dq_obs_.setZero(dataset.steps(), N);
    for (int n : obs) {
        dp_obs_.col(n - 1) = dataset.dp.col(n - 1);
        dq_obs_.col(n - 1) = dataset.dq.col(n - 1);
    }
    dv_rows_.resize(dataset.steps(), static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i)
        dv_rows_.col(i) = dataset.dv.col(rows_[i] - 1);
}

ParamVector EstimationProblem::make_theta(Eigen::VectorXd values) const {
    ParamVector p;
    p.mode = mode_;
    p.theta = std::move(values);
    if (mode_ == ParamMode::RatioFixed) p.ratios = ratios_;
    if (p.params() != params()) throw DimensionMismatch("parameter vector has wrong length");
    return p;
}

Eigen::VectorXd EstimationProblem::predict_observed(const ParamVector& theta, int t) const {
    const Eigen::VectorXd r = theta.resistance();
    const Eigen::VectorXd x = theta.reactance();
    const Eigen::VectorXd fp = feeder_->subtree_sums(dp_obs_.row(t).transpose());
    const Eigen::VectorXd fq = feeder_->subtree_sums(dq_obs_.row(t).transpose());
    const Eigen::VectorXd nodal =
        feeder_->path_sums((r.array() * fp.array() + x.array() * fq.array()).matrix());
    return select_entries(nodal, rows_);
}

Eigen::MatrixXd EstimationProblem::design_row_block(int t, const Eigen::RowVectorXd* s_u) const {
    Eigen::VectorXd dp = dp_obs_.row(t).transpose();
    Eigen::VectorXd dq = dq_obs_.row(t).transpose();
    if (s_u != nullptr) {
        for (std::size_t k = 0; k < u_nodes_.size(); ++k) {
            dp(u_nodes_[k] - 1) += (*s_u)(2 * k);
            dq(u_nodes_[k] - 1) += (*s_u)(2 * k + 1);
        }
    }
    const Eigen::VectorXd* z = mode_ == ParamMode::RatioFixed ? &ratios_ : nullptr;
    return select_rows(assemble_regression(*feeder_, dp, dq, mode_, z), rows_);
}

Eigen::MatrixXd EstimationProblem::unobserved_design(const ParamVector& theta) const {
    const SensitivityMatrices sens =
        sensitivity_matrices(*feeder_, theta.resistance(), theta.reactance());
    Eigen::MatrixXd B(static_cast<Eigen::Index>(rows_.size()),
                      static_cast<Eigen::Index>(2 * u_nodes_.size()));
    for (std::size_t k = 0; k < u_nodes_.size(); ++k) {
        const int n = u_nodes_[k];
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            B(i, 2 * k) = sens.R(rows_[i] - 1, n - 1);
            B(i, 2 * k + 1) = sens.X(rows_[i] - 1, n - 1);
        }
    }
    return B;
}

ParamVector theta_update(const EstimationProblem& prob, const Eigen::MatrixXd& s_u, double alpha,
                         const std::vector<int>* subset, int threads) {
    if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
    const std::vector<int> all = subset == nullptr ? all_steps(prob.steps()) : *subset;
    if (all.empty()) throw EmptyFold("no timesteps to fit");
    const int P = prob.params();
    const bool have_s = s_u.size() > 0;

    std::vector<Eigen::MatrixXd> g_part(std::max(1, threads), Eigen::MatrixXd::Zero(P, P));
    std::vector<Eigen::VectorXd> h_part(std::max(1, threads), Eigen::VectorXd::Zero(P));
    parallel_chunks(static_cast<int>(all.size()), threads, [&](int chunk, int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            const int t = all[i];
            Eigen::RowVectorXd srow;
            if (have_s) srow = s_u.row(t);
            const Eigen::MatrixXd a = prob.design_row_block(t, have_s ? &srow : nullptr);
            g_part[chunk].selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
            h_part[chunk].noalias() += a.transpose() * prob.dv_rows().row(t).transpose();
        }
    });
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(P, P);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(P);
    for (std::size_t k = 0; k < g_part.size(); ++k) {
        g += g_part[k];
        h += h_part[k];
    }
    g = g.selfadjointView<Eigen::Lower>();
    const double inv_t = 1.0 / static_cast<double>(all.size());
    g *= inv_t;
    h *= inv_t;
    g.diagonal().array() += alpha;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    Eigen::VectorXd theta = ldlt.solve(h);
    theta += ldlt.solve(h - g * theta);  // one refinement step
    const double rel = (g * theta - h).norm() / std::max(h.norm(), 1e-300);
    if (!theta.allFinite() || rel > 1e-6) {
        if (alpha <= 0.0)
            throw SingularNormalMatrix("normal matrix is rank deficient with alpha = 0");
        throw NumericalError("ridge solve failed to reach a consistent solution");
    }
    return prob.make_theta(std::move(theta));
}

ParamVector zi_estimate(const EstimationProblem& prob, double alpha, const std::vector<int>* subset,
                        int threads) {
    return theta_update(prob, Eigen::MatrixXd(), alpha, subset, threads);
}

double am_objective(const EstimationProblem& prob, const ParamVector& theta,
                    const Eigen::MatrixXd& s_u, double lambda, double alpha,
                    const std::vector<int>* subset) {
    const std::vector<int> all = subset == nullptr ? all_steps(prob.steps()) : *subset;
    const bool have_s = s_u.size() > 0 && prob.unobserved().size() > 0;
    Eigen::MatrixXd B;
    if (have_s) B = prob.unobserved_design(theta);
    double acc = 0.0;
    for (int t : all) {
        Eigen::VectorXd resid = prob.dv_rows().row(t).transpose() - prob.predict_observed(theta, t);
        if (have_s) {
            resid.noalias() -= B * s_u.row(t).transpose();
            acc += lambda * group_l1_norm(s_u.row(t).transpose());
        }
        acc += resid.squaredNorm();
    }
    return acc / static_cast<double>(all.size()) + alpha * theta.theta.squaredNorm();
}

AmState am_solve(const EstimationProblem& prob, const Hyperparameters& hp, int threads,
                 const std::vector<int>* subset) {
    if (!(hp.alpha > 0.0)) throw ConfigError("alternating minimization needs alpha > 0");
    if (hp.lambda < 0.0) throw ConfigError("lambda must be non-negative");
    const std::vector<int> steps = subset == nullptr ? all_steps(prob.steps()) : *subset;
    const int U = static_cast<int>(prob.unobserved().size());

    AmState st;
    st.s_u.setZero(prob.steps(), 2 * U);
    st.theta_zi = zi_estimate(prob, hp.alpha, subset, threads);
    st.theta = st.theta_zi;
    st.objective_trace.push_back(am_objective(prob, st.theta, st.s_u, hp.lambda, hp.alpha, subset));

    const auto check_monotone = [&](double next) {
        if (next > st.objective_trace.back() + 1e-9)
            throw MonotonicityViolation("objective rose from " +
                                        std::to_string(st.objective_trace.back()) + " to " +
                                        std::to_string(next));
        st.objective_trace.push_back(next);
    };

    for (int i = 1; i <= hp.max_am_iters; ++i) {
        const auto tic = std::chrono::steady_clock::now();

        if (U > 0) {
            const GroupLassoDesign design(prob.unobserved_design(st.theta), hp.lambda);
            parallel_chunks(static_cast<int>(steps.size()), threads, [&](int, int lo, int hi) {
                for (int k = lo; k < hi; ++k) {
                    const int t = steps[k];
                    const Eigen::VectorXd c =
                        prob.dv_rows().row(t).transpose() - prob.predict_observed(st.theta, t);
                    const Eigen::VectorXd warm = st.s_u.row(t).transpose();
                    st.s_u.row(t) =
                        design.solve(c, hp.inner_tol, hp.max_inner_iters, &warm).u.transpose();
                }
            });
        }
        check_monotone(am_objective(prob, st.theta, st.s_u, hp.lambda, hp.alpha, subset));

        const ParamVector next = theta_update(prob, st.s_u, hp.alpha, subset, threads);
        check_monotone(am_objective(prob, next, st.s_u, hp.lambda, hp.alpha, subset));

        const double delta = (next.theta - st.theta.theta).norm();
        st.theta = next;
        st.iterations = i;
        st.iteration_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count());
        if (delta < hp.epsilon) {
            st.converged = true;
            break;
        }
    }
    return st;
}

CvResult cross_validate(const EstimationProblem& prob, const std::vector<double>& lambda_grid,
                        const std::vector<double>& alpha_grid, int folds, std::uint64_t seed,
                        const Hyperparameters& base, int threads) {
    if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
    if (lambda_grid.empty() || alpha_grid.empty()) throw ConfigError("empty hyperparameter grid");
    const int T = prob.steps();
    if (T < folds) throw EmptyFold("fewer timesteps than folds");

    // shuffle timesteps, slice into near-equal folds
    std::vector<int> order = all_steps(T);
    Rng rng(seed);
    for (int i = T - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    std::vector<std::vector<int>> fold_steps(folds);
    std::vector<std::vector<int>> train_steps(folds);
    for (int k = 0; k < folds; ++k) {
        const int lo = static_cast<int>(static_cast<long long>(k) * T / folds);
        const int hi = static_cast<int>(static_cast<long long>(k + 1) * T / folds);
        fold_steps[k].assign(order.begin() + lo, order.begin() + hi);
        if (fold_steps[k].empty()) throw EmptyFold("fold " + std::to_string(k) + " is empty");
        train_steps[k].reserve(T - (hi - lo));
        train_steps[k].insert(train_steps[k].end(), order.begin(), order.begin() + lo);
        train_steps[k].insert(train_steps[k].end(), order.begin() + hi, order.end());
    }

    CvResult res;
    for (int k = 0; k < folds; ++k) res.fold_sizes.push_back(static_cast<int>(fold_steps[k].size()));
    for (double lambda : lambda_grid) {
        for (double alpha : alpha_grid) {
            CvRow row;
            row.lambda = lambda;
            row.alpha = alpha;
            Hyperparameters hp = base;
            hp.lambda = lambda;
            hp.alpha = alpha;
            for (int k = 0; k < folds; ++k) {
                const AmState st = am_solve(prob, hp, threads, &train_steps[k]);
                const bool have_u = !prob.unobserved().empty();
                GroupLassoDesign design(have_u ? prob.unobserved_design(st.theta)
                                               : Eigen::MatrixXd::Zero(prob.rows().size(), 0),
                                        lambda);
                double score = 0.0;
                for (int t : fold_steps[k]) {
                    Eigen::VectorXd c =
                        prob.dv_rows().row(t).transpose() - prob.predict_observed(st.theta, t);
                    if (have_u)
                        c -= design.design() *
                             design.solve(c, hp.inner_tol, hp.max_inner_iters).u;
                    score += c.squaredNorm();
                }
                row.fold_scores.push_back(score / static_cast<double>(fold_steps[k].size()));
            }
            row.mean_score = 0.0;
            for (double s : row.fold_scores) row.mean_score += s;
            row.mean_score /= static_cast<double>(folds);
            res.table.push_back(std::move(row));
        }
    }

    double best = res.table.front().mean_score;
    for (const auto& row : res.table) best = std::min(best, row.mean_score);
    const CvRow* pick = nullptr;
    for (const auto& row : res.table) {
        if (row.mean_score > best + 1e-12) continue;
        if (pick == nullptr || row.lambda < pick->lambda ||
            (row.lambda == pick->lambda && row.alpha < pick->alpha))
            pick = &row;
    }
    res.lambda = pick->lambda;
    res.alpha = pick->alpha;
    return res;
}

double total_vector_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
    return (estimate - truth).norm() / truth.norm();
}

Eigen::VectorXd validate_voltage(const FeederModel& true_feeder, const ParamVector& estimate,
                                 const LoadSeries& holdout, const AcOptions& ac) {
    const FeederModel est_feeder =
        true_feeder.with_parameters(estimate.resistance(), estimate.reactance());
    const int T = holdout.steps();
    Eigen::VectorXd err(T);
    for (int t = 1; t <= T; ++t) {
        InjectionState inj{holdout.p.row(t).transpose(), holdout.q.row(t).transpose()};
        const Eigen::VectorXd v_true = ac_power_flow(true_feeder, inj, ac).v;
        const Eigen::VectorXd v_est = ac_power_flow(est_feeder, inj, ac).v;
        err(t - 1) = (v_est - v_true).norm() / v_true.norm();
    }
    return err;
}

std::vector<int> group_sparsity_per_step(const Eigen::MatrixXd& s_u) {
    std::vector<int> out(s_u.rows(), 0);
    for (Eigen::Index t = 0; t < s_u.rows(); ++t)
        for (Eigen::Index g = 0; 2 * g + 1 < s_u.cols(); ++g)
            if (s_u(t, 2 * g) != 0.0 || s_u(t, 2 * g + 1) != 0.0) ++out[t];
    return out;
}

}  // namespace dgmod
