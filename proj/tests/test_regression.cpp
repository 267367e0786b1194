#include "doctest.h"
#include "dgmod/regression.hpp"
#include "dgmod/scenario.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dgmod;
using testutil::random_feeder;
using testutil::single_line;

namespace {

Eigen::VectorXd random_vec(int n, Rng& rng, double lo = -0.1, double hi = 0.1) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("single line full-mode matrix") {
    const FeederModel f = single_line(0.1, 0.2);
    Eigen::VectorXd dp(1), dq(1);
    dp << 1.0;
    dq << 0.0;
    const Eigen::MatrixXd a = assemble_regression(f, dp, dq, ParamMode::Full);
    REQUIRE(a.rows() == 1);
    REQUIRE(a.cols() == 2);
    CHECK(a(0, 0) == 1.0);
    CHECK(a(0, 1) == 0.0);
    Eigen::VectorXd theta(2);
    theta << 0.1, 0.2;
    CHECK((a * theta)(0) == doctest::Approx(0.1));
}

TEST_CASE("matrix action matches the sensitivity matrices") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 3 + static_cast<int>(rng.below(20));
        const FeederModel f = random_feeder(n, rng);
        const Eigen::VectorXd dp = random_vec(n, rng);
        const Eigen::VectorXd dq = random_vec(n, rng);
        const Eigen::VectorXd r = random_vec(n, rng, 0.01, 0.1);
        const Eigen::VectorXd x = random_vec(n, rng, 0.01, 0.1);
        const auto s = oracle::dense_sensitivity(f, r, x);

        const Eigen::MatrixXd a = assemble_regression(f, dp, dq, ParamMode::Full);
        Eigen::VectorXd theta(2 * n);
        theta << r, x;
        const Eigen::VectorXd want = s.R * dp + s.X * dq;
        CHECK((a * theta - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("ratio-fixed equals full mode with tied resistances") {
    Rng rng(29);
    const int n = 9;
    const FeederModel f = random_feeder(n, rng);
    const Eigen::VectorXd dp = random_vec(n, rng);
    const Eigen::VectorXd dq = random_vec(n, rng);
    const Eigen::VectorXd z = random_vec(n, rng, 0.3, 2.0);
    const Eigen::VectorXd x = random_vec(n, rng, 0.01, 0.1);

    const Eigen::MatrixXd ax = assemble_regression(f, dp, dq, ParamMode::RatioFixed, &z);
    const Eigen::MatrixXd a = assemble_regression(f, dp, dq, ParamMode::Full);
    Eigen::VectorXd theta(2 * n);
    theta << (z.array() * x.array()).matrix(), x;
    CHECK((ax * x - a * theta).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ratio-fixed requires ratios") {
    const FeederModel f = single_line();
    Eigen::VectorXd v(1);
    v << 0.1;
    CHECK_THROWS_AS(assemble_regression(f, v, v, ParamMode::RatioFixed), MissingRatios);
}

TEST_CASE("assembly is linear in the injections and splits add up") {
    Rng rng(31);
    const int n = 12;
    const FeederModel f = random_feeder(n, rng);
    const Eigen::VectorXd dp1 = random_vec(n, rng), dp2 = random_vec(n, rng);
    const Eigen::VectorXd dq1 = random_vec(n, rng), dq2 = random_vec(n, rng);
    const double a1 = rng.uniform(-2.0, 2.0), a2 = rng.uniform(-2.0, 2.0);

    const Eigen::MatrixXd lhs = assemble_regression(f, a1 * dp1 + a2 * dp2, a1 * dq1 + a2 * dq2,
                                                    ParamMode::Full);
    const Eigen::MatrixXd rhs = a1 * assemble_regression(f, dp1, dq1, ParamMode::Full) +
                                a2 * assemble_regression(f, dp2, dq2, ParamMode::Full);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

    // observed/unobserved split: masked halves rebuild the whole matrix
    std::vector<int> observed, unobserved;
    for (int b = 1; b <= n; ++b) (rng.bernoulli(0.5) ? observed : unobserved).push_back(b);
    const Eigen::MatrixXd a_obs = assemble_regression(f, mask_to(dp1, observed),
                                                      mask_to(dq1, observed), ParamMode::Full);
    const Eigen::MatrixXd a_un = assemble_regression(f, mask_to(dp1, unobserved),
                                                     mask_to(dq1, unobserved), ParamMode::Full);
    const Eigen::MatrixXd whole = assemble_regression(f, dp1, dq1, ParamMode::Full);
    CHECK((a_obs + a_un - whole).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(assemble_regression(f, mask_to(dp1, {}), mask_to(dq1, {}), ParamMode::Full)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("noiseless full observability fits exactly") {
    Rng rng(37);
    const FeederModel f = random_feeder(10, rng);
    const LoadSeries loads = synth_loads(f, testutil::default_changes(41), 30);
    const DifferenceDataset d =
        generate_dataset(f, loads, testutil::full_partition(f), TruthMode::Ldf);
    Eigen::VectorXd theta(20);
    theta << f.resistance(), f.reactance();
    for (int t = 0; t < d.steps(); ++t) {
        const Eigen::MatrixXd a = assemble_regression(f, d.dp.row(t).transpose(),
                                                      d.dq.row(t).transpose(), ParamMode::Full);
        CHECK((d.dv.row(t).transpose() - a * theta).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("synchronized changes collapse the numerical rank") {
    Rng rng(43);
    const int n = 6;
    const FeederModel f = random_feeder(n, rng);
    const Eigen::VectorXd dp = random_vec(n, rng);
    const Eigen::VectorXd dq = 0.4843 * dp;  // fixed power factor
    const Eigen::MatrixXd a = assemble_regression(f, dp, dq, ParamMode::Full);
    CHECK(numerical_rank(a) <= n);

    const Eigen::VectorXd dq2 = random_vec(n, rng);
    Eigen::MatrixXd stacked(2 * n, 2 * n);
    stacked.topRows(n) = a;
    stacked.bottomRows(n) = assemble_regression(f, random_vec(n, rng), dq2, ParamMode::Full);
    CHECK(numerical_rank(stacked) > n);
}
