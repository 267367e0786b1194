#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgmod/estimator.hpp"
#include "dgmod/scenario.hpp"

namespace dgmod {

struct SyntheticSource {
    int T = 200;
    SparseChangeConfig change;
};

struct CvConfig {
    std::vector<double> lambda_grid{1e-6, 1e-5, 1e-4, 1e-3};
    std::vector<double> alpha_grid{1e-10, 1e-8, 1e-6};
    int folds = 5;
    std::uint64_t seed = 1;
};

/// One experiment, loadable from a single JSON file. Exactly one of
/// synthetic / bundle acts as the data source.
struct ExperimentConfig {
    std::string feeder_path = "data/ieee123.json";
    ParamMode mode = ParamMode::RatioFixed;
    std::optional<std::vector<double>> ratios;  // override; default come from the feeder file
    std::optional<SyntheticSource> synthetic;
    std::optional<std::string> bundle;
    PartitionSpec partition;
    TruthMode truth_mode = TruthMode::Ac;
    double noise_sigma = 0.0;
    Hyperparameters hp;
    CvConfig cv;
    AcOptions ac;
    std::string out = "out";
    std::uint64_t seed = 0;
    int threads = 1;
};

ExperimentConfig default_config();
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);  // pretty-printed

/// Feeder file: { "v0": 1.0, "root": "150", "lines": [ {"from","to","r","x"}... ] }.
/// root is optional; see FeederModel::build for the default rule.
FeederModel load_feeder(const std::filesystem::path& path);

}  // namespace dgmod
