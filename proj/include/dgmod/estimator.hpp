#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dgmod/feeder.hpp"
#include "dgmod/group_lasso.hpp"
#include "dgmod/regression.hpp"
#include "dgmod/scenario.hpp"

namespace dgmod {

struct Hyperparameters {
    double lambda = 1e-4;   // group-sparsity weight on unobserved differences
    double alpha = 1e-8;    // ridge weight on the parameter vector
    double epsilon = 1e-8;  // stop when ||theta_i - theta_{i-1}|| drops below
    int max_am_iters = 100;
    double inner_tol = 1e-10;  // BCD stop on the largest coordinate change
    int max_inner_iters = 500;
};

/// Assembled regression data for one feeder + difference dataset. Observed
/// injection columns keep their values, unobserved ones are zeroed; voltage
/// rows are restricted to the metered-voltage buses.
class EstimationProblem {
public:
    EstimationProblem(const FeederModel& feeder, const DifferenceDataset& dataset, ParamMode mode,
                      Eigen::VectorXd ratios = {});

    const FeederModel& feeder() const { return *feeder_; }
    ParamMode mode() const { return mode_; }
    const Eigen::VectorXd& ratios() const { return ratios_; }
    const std::vector<int>& rows() const { return rows_; }
    const std::vector<int>& unobserved() const { return u_nodes_; }
    int steps() const { return static_cast<int>(dv_rows_.rows()); }
    int params() const { return param_count(*feeder_, mode_); }

    const Eigen::MatrixXd& observed_dp() const { return dp_obs_; }
    const Eigen::MatrixXd& observed_dq() const { return dq_obs_; }
    const Eigen::MatrixXd& dv_rows() const { return dv_rows_; }

    /// Voltage-difference prediction at the metered rows from observed
    /// injections alone, for one timestep.
    Eigen::VectorXd predict_observed(const ParamVector& theta, int t) const;

    /// Regression matrix (metered rows only) for the combined injection
    /// differences at timestep t; s_u holds recovered unobserved pairs.
    Eigen::MatrixXd design_row_block(int t, const Eigen::RowVectorXd* s_u) const;

    /// Columns of the sensitivity matrices at the unobserved nodes,
    /// restricted to the metered rows: the group-lasso design at theta.
    Eigen::MatrixXd unobserved_design(const ParamVector& theta) const;

    ParamVector make_theta(Eigen::VectorXd values) const;

private:
    const FeederModel* feeder_;
    ParamMode mode_;
    Eigen::VectorXd ratios_;
    std::vector<int> rows_;
    std::vector<int> u_nodes_;
    Eigen::MatrixXd dp_obs_, dq_obs_;  // T x N, unobserved columns zeroed
    Eigen::MatrixXd dv_rows_;          // T x |rows|
};

/// Closed-form ridge update of the parameter vector given recovered
/// unobserved differences (T x 2|U|, zero rows allowed). subset selects
/// timesteps; null means all.
ParamVector theta_update(const EstimationProblem& prob, const Eigen::MatrixXd& s_u, double alpha,
                         const std::vector<int>* subset = nullptr, int threads = 1);

/// Baseline that assumes unobserved differences are zero.
ParamVector zi_estimate(const EstimationProblem& prob, double alpha,
                        const std::vector<int>* subset = nullptr, int threads = 1);

/// Objective of the regularized bi-linear fit at (theta, s_u).
double am_objective(const EstimationProblem& prob, const ParamVector& theta,
                    const Eigen::MatrixXd& s_u, double lambda, double alpha,
                    const std::vector<int>* subset = nullptr);

struct AmState {
    ParamVector theta;
    ParamVector theta_zi;             // the initialization
    Eigen::MatrixXd s_u;              // T x 2|U| recovered pairs
    std::vector<double> objective_trace;  // after every half-step
    int iterations = 0;
    bool converged = false;
    std::vector<double> iteration_seconds;
};

/// Alternating minimization: group-lasso recovery of the unobserved
/// injection differences, then the ridge parameter update, until the
/// parameter change drops below epsilon. The objective trace is checked to
/// be non-increasing (1e-9 slack); a rise raises MonotonicityViolation.
AmState am_solve(const EstimationProblem& prob, const Hyperparameters& hp, int threads = 1,
                 const std::vector<int>* subset = nullptr);

struct CvRow {
    double lambda = 0.0;
    double alpha = 0.0;
    std::vector<double> fold_scores;
    double mean_score = 0.0;
};

struct CvResult {
    double lambda = 0.0;
    double alpha = 0.0;
    std::vector<int> fold_sizes;
    std::vector<CvRow> table;
};

/// K-fold selection of (lambda, alpha). Timesteps are shuffled into K
/// near-equal folds; each candidate trains on K-1 folds and is scored on
/// the held-out fold by the mean squared voltage-difference fitting error,
/// with the held-out unobserved differences re-estimated at the trained
/// parameters. Ties within 1e-12 go to the smallest lambda, then alpha.
CvResult cross_validate(const EstimationProblem& prob, const std::vector<double>& lambda_grid,
                        const std::vector<double>& alpha_grid, int folds, std::uint64_t seed,
                        const Hyperparameters& base, int threads = 1);

/// ||estimate - truth|| / ||truth||.
double total_vector_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth);

/// Per-timestep normalized voltage error of an estimated parameter set
/// against the true feeder, both solved with the ac power flow on the
/// holdout loads. One entry per step (samples 1..T).
Eigen::VectorXd validate_voltage(const FeederModel& true_feeder, const ParamVector& estimate,
                                 const LoadSeries& holdout, const AcOptions& ac = {});

/// Nonzero recovered groups per timestep (exact zeros).
std::vector<int> group_sparsity_per_step(const Eigen::MatrixXd& s_u);

}  // namespace dgmod
