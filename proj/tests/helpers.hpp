#pragma once

#include <string>
#include <vector>

#include "dgmod/estimator.hpp"
#include "dgmod/feeder.hpp"
#include "dgmod/rng.hpp"
#include "dgmod/scenario.hpp"

namespace testutil {

// random recursive tree: bus k attaches to a uniformly chosen earlier bus
inline std::vector<dgmod::LineSpec> random_tree_lines(int n, dgmod::Rng& rng, double x_lo = 0.01,
                                                      double x_hi = 0.04, double z_lo = 0.5,
                                                      double z_hi = 2.0) {
    std::vector<dgmod::LineSpec> lines;
    for (int k = 1; k <= n; ++k) {
        dgmod::LineSpec ls;
        ls.from = std::to_string(rng.below(k));
        ls.to = std::to_string(k);
        ls.x = rng.uniform(x_lo, x_hi);
        ls.r = rng.uniform(z_lo, z_hi) * ls.x;
        lines.push_back(std::move(ls));
    }
    return lines;
}

inline dgmod::FeederModel random_feeder(int n, dgmod::Rng& rng) {
    return dgmod::FeederModel::build(random_tree_lines(n, rng));
}

inline dgmod::FeederModel chain_feeder(int n, double r = 0.02, double x = 0.03) {
    std::vector<dgmod::LineSpec> lines;
    for (int k = 1; k <= n; ++k)
        lines.push_back({std::to_string(k - 1), std::to_string(k), r, x, {}});
    return dgmod::FeederModel::build(lines);
}

inline dgmod::FeederModel star_feeder(int n, double r = 0.02, double x = 0.03) {
    std::vector<dgmod::LineSpec> lines;
    for (int k = 1; k <= n; ++k) lines.push_back({"0", std::to_string(k), r, x, {}});
    return dgmod::FeederModel::build(lines);
}

inline dgmod::FeederModel single_line(double r = 0.1, double x = 0.2) {
    return dgmod::FeederModel::build({{"0", "1", r, x, {}}});
}

// partition with all leaves observed plus a seeded fraction of the interior
inline dgmod::ObservabilityPartition leaves_plus(const dgmod::FeederModel& f,
                                                 double interior_fraction, dgmod::Rng& rng) {
    dgmod::PartitionSpec spec;
    spec.kind = dgmod::PartitionSpec::Kind::Explicit;
    std::vector<int> interior;
    for (int n = 1; n <= f.size(); ++n) {
        if (f.is_leaf(n))
            spec.observed_labels.push_back(f.label(n));
        else
            interior.push_back(n);
    }
    const int extra = static_cast<int>(interior_fraction * interior.size() + 0.5);
    for (int k = 0; k < extra; ++k) {
        const auto pick = k + static_cast<int>(rng.below(interior.size() - k));
        std::swap(interior[k], interior[pick]);
        spec.observed_labels.push_back(f.label(interior[k]));
    }
    return dgmod::make_partition(f, spec);
}

inline dgmod::ObservabilityPartition full_partition(const dgmod::FeederModel& f) {
    dgmod::PartitionSpec spec;
    spec.kind = dgmod::PartitionSpec::Kind::Explicit;
    for (int n = 1; n <= f.size(); ++n) spec.observed_labels.push_back(f.label(n));
    return dgmod::make_partition(f, spec);
}

inline dgmod::SparseChangeConfig default_changes(std::uint64_t seed) {
    dgmod::SparseChangeConfig cfg;
    cfg.seed = seed;
    return cfg;
}

// Observability study fixture mirroring a metered feeder: end-buses hold
// 45% of the nodes and always carry meters, lateral meters top the set up
// to the requested fraction, and a few junction buses get voltage sensors.
struct StudyScenario {
    dgmod::FeederModel feeder;
    dgmod::LoadSeries loads;
    dgmod::DifferenceDataset dataset;
};

inline dgmod::FeederModel tree_with_leaf_share(int n, double share, dgmod::Rng& rng) {
    const int target = static_cast<int>(std::ceil(share * n));
    for (int attempt = 0; attempt < 2000; ++attempt) {
        dgmod::FeederModel f =
            dgmod::FeederModel::build(random_tree_lines(n, rng, 0.005, 0.02, 0.5, 2.0));
        int leaves = 0;
        for (int b = 1; b <= n; ++b) leaves += f.is_leaf(b) ? 1 : 0;
        if (leaves == target) return f;
    }
    throw std::runtime_error("no tree with the requested leaf count");
}

inline dgmod::ObservabilityPartition metered_partition(const dgmod::FeederModel& f, double frac,
                                                       dgmod::Rng& rng, int extra_voltage = 3) {
    const int n = f.size();
    const int want = static_cast<int>(std::ceil(frac * n));
    dgmod::PartitionSpec spec;
    spec.kind = dgmod::PartitionSpec::Kind::Explicit;
    std::vector<int> interior;
    for (int b = 1; b <= n; ++b) {
        if (f.is_leaf(b))
            spec.observed_labels.push_back(f.label(b));
        else
            interior.push_back(b);
    }
    for (int k = 0; static_cast<int>(spec.observed_labels.size()) < want &&
                    k < static_cast<int>(interior.size());
         ++k) {
        const auto pick = k + static_cast<int>(rng.below(interior.size() - k));
        std::swap(interior[k], interior[pick]);
        spec.observed_labels.push_back(f.label(interior[k]));
    }
    std::vector<std::pair<int, int>> by_degree;
    for (int b = 1; b <= n; ++b)
        if (!f.is_leaf(b))
            by_degree.push_back({-static_cast<int>(f.children(b).size()), b});
    std::sort(by_degree.begin(), by_degree.end());
    for (int k = 0; k < extra_voltage && k < static_cast<int>(by_degree.size()); ++k)
        spec.voltage_observed_labels.push_back(f.label(by_degree[k].second));
    return dgmod::make_partition(f, spec);
}

inline StudyScenario make_study(int n, double observed_frac, std::uint64_t seed, int T,
                                dgmod::TruthMode mode) {
    dgmod::Rng tree_rng(1000 + seed);
    StudyScenario s{tree_with_leaf_share(n, 0.45, tree_rng), {}, {}};
    dgmod::Rng prng(3000 + seed);
    const auto part = metered_partition(s.feeder, observed_frac, prng);

    // redraw load trajectories that drift outside the small-excursion band
    // the difference model is valid in
    for (std::uint64_t redraw = 0;; ++redraw) {
        dgmod::SparseChangeConfig cfg = default_changes(2000 + seed + 10000 * redraw);
        cfg.max_injection = 0.2;
        s.loads = synth_loads(s.feeder, cfg, T);
        const Eigen::MatrixXd v = dgmod::voltage_series(s.feeder, s.loads, mode);
        if ((v.array() - s.feeder.v0()).abs().maxCoeff() <= 0.12 || redraw >= 50) {
            s.dataset = dgmod::make_differences(s.loads, v, part);
            return s;
        }
    }
}

}  // namespace testutil
