#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dgmod/config.hpp"

namespace dgmod {

/// A dataset bundle directory: feeder.json, p.csv, q.csv, v.csv,
/// partition.json, manifest.json.
struct Bundle {
    FeederModel feeder;
    LoadSeries loads;
    Eigen::MatrixXd v_samples;
    ObservabilityPartition partition;
    bool synthetic_truth = false;  // line parameters in feeder.json are ground truth
};

void write_bundle(const std::filesystem::path& dir, const std::filesystem::path& feeder_src,
                  const FeederModel& feeder, const LoadSeries& loads,
                  const Eigen::MatrixXd& v_samples, const ObservabilityPartition& partition,
                  const ExperimentConfig& cfg);
Bundle read_bundle(const std::filesystem::path& dir);

void cmd_generate(const ExperimentConfig& cfg);
void cmd_estimate(const ExperimentConfig& cfg, std::optional<int> dump_regression_step = {});
void cmd_cv(const ExperimentConfig& cfg);
void cmd_validate(const ExperimentConfig& cfg, const std::filesystem::path& report_path,
                  const std::filesystem::path& holdout_bundle);
void cmd_powerflow(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace dgmod
