#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgmod/feeder.hpp"
#include "dgmod/powerflow.hpp"

namespace dgmod {

/// Injection time series: T+1 samples at a uniform interval, one column per
/// non-reference bus (internal bus order).
struct LoadSeries {
    Eigen::MatrixXd p;
    Eigen::MatrixXd q;
    int samples() const { return static_cast<int>(p.rows()); }
    int steps() const { return samples() - 1; }
};

/// Synthetic load generator settings. Each node holds a base load and, per
/// step, jumps with probability change_prob; active and reactive power move
/// in the same event with a power factor drawn from pf_range.
struct SparseChangeConfig {
    double change_prob = 0.05;
    double mag_lo = 0.01;   // |active power change|, p.u.
    double mag_hi = 0.10;
    double pf_lo = 0.90;
    double pf_hi = 0.95;
    double base_lo = 0.02;  // |base active load|, p.u.
    double base_hi = 0.08;
    double max_injection = 1.0;
    std::uint64_t seed = 0;
};

LoadSeries synth_loads(const FeederModel& feeder, const SparseChangeConfig& cfg, int T);

struct ObservabilityPartition {
    std::vector<int> observed;          // bus ids, ascending
    std::vector<int> unobserved;        // complement, ascending
    std::vector<int> voltage_observed;  // buses with metered voltage; defaults to observed
};

struct PartitionSpec {
    enum class Kind { LeafOnly, Fraction, Explicit };
    Kind kind = Kind::LeafOnly;
    double fraction = 0.5;
    std::uint64_t seed = 0;
    std::vector<std::string> observed_labels;          // Explicit
    std::vector<std::string> voltage_observed_labels;  // optional extras, any kind
};

ObservabilityPartition make_partition(const FeederModel& feeder, const PartitionSpec& spec);

enum class TruthMode { Ldf, Ac };

/// Voltage magnitude samples for every row of the load series, (T+1) x N.
Eigen::MatrixXd voltage_series(const FeederModel& feeder, const LoadSeries& loads, TruthMode mode,
                               const AcOptions& ac = {});

/// Consecutive-difference dataset consumed by the estimator.
struct DifferenceDataset {
    Eigen::MatrixXd dv;  // T x N, v_t - v_{t-1}
    Eigen::MatrixXd dp;
    Eigen::MatrixXd dq;
    ObservabilityPartition partition;
    int steps() const { return static_cast<int>(dv.rows()); }
};

DifferenceDataset make_differences(const LoadSeries& loads, const Eigen::MatrixXd& v_samples,
                                   ObservabilityPartition partition, double noise_sigma = 0.0,
                                   std::uint64_t noise_seed = 0);

DifferenceDataset generate_dataset(const FeederModel& feeder, const LoadSeries& loads,
                                   ObservabilityPartition partition, TruthMode mode,
                                   double noise_sigma = 0.0, std::uint64_t noise_seed = 0,
                                   const AcOptions& ac = {});

/// Series ingested from a CSV bundle. Columns are matched to feeder buses by
/// header label; every non-reference bus must be present.
struct IngestedSeries {
    LoadSeries loads;
    Eigen::MatrixXd v_samples;
};

IngestedSeries ingest_csv(const FeederModel& feeder, const std::filesystem::path& p_path,
                          const std::filesystem::path& q_path, const std::filesystem::path& v_path);

}  // namespace dgmod
