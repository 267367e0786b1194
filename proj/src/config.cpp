#include "dgmod/config.hpp"

#include <fstream>

#include "json.hpp"

namespace dgmod {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return j;
}

ParamMode parse_mode(const std::string& s) {
    if (s == "full") return ParamMode::Full;
    if (s == "ratio_fixed") return ParamMode::RatioFixed;
    throw ConfigError("unknown mode '" + s + "' (expected full or ratio_fixed)");
}

TruthMode parse_truth(const std::string& s) {
    if (s == "ldf") return TruthMode::Ldf;
    if (s == "ac") return TruthMode::Ac;
    throw ConfigError("unknown truth_mode '" + s + "' (expected ldf or ac)");
}

PartitionSpec parse_partition(const json& j) {
    PartitionSpec spec;
    const std::string kind = j.value("kind", "leaf_only");
    if (kind == "leaf_only") {
        spec.kind = PartitionSpec::Kind::LeafOnly;
    } else if (kind == "fraction") {
        spec.kind = PartitionSpec::Kind::Fraction;
        spec.fraction = j.at("fraction").get<double>();
        spec.seed = j.value("seed", std::uint64_t{0});
    } else if (kind == "explicit") {
        spec.kind = PartitionSpec::Kind::Explicit;
        spec.observed_labels = j.at("observed").get<std::vector<std::string>>();
    } else {
        throw ConfigError("unknown partition kind '" + kind + "'");
    }
    if (j.contains("voltage_observed"))
        spec.voltage_observed_labels = j.at("voltage_observed").get<std::vector<std::string>>();
    return spec;
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.synthetic = SyntheticSource{};
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    ExperimentConfig cfg;
    try {
        cfg.feeder_path = j.value("feeder", cfg.feeder_path);
        if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
        if (j.contains("ratios")) cfg.ratios = j.at("ratios").get<std::vector<double>>();
        if (j.contains("truth_mode")) cfg.truth_mode = parse_truth(j.at("truth_mode"));
        cfg.noise_sigma = j.value("noise_sigma", 0.0);
        if (j.contains("partition")) cfg.partition = parse_partition(j.at("partition"));

        if (j.contains("data")) {
            const json& d = j.at("data");
            if (d.contains("synthetic") == d.contains("bundle"))
                throw ConfigError("data must name exactly one of synthetic or bundle");
            if (d.contains("synthetic")) {
                const json& s = d.at("synthetic");
                SyntheticSource src;
                src.T = s.value("T", src.T);
                src.change.change_prob = s.value("change_prob", src.change.change_prob);
                if (s.contains("magnitude")) {
                    src.change.mag_lo = s.at("magnitude").at(0).get<double>();
                    src.change.mag_hi = s.at("magnitude").at(1).get<double>();
                }
                if (s.contains("power_factor")) {
                    src.change.pf_lo = s.at("power_factor").at(0).get<double>();
                    src.change.pf_hi = s.at("power_factor").at(1).get<double>();
                }
                if (s.contains("base_load")) {
                    src.change.base_lo = s.at("base_load").at(0).get<double>();
                    src.change.base_hi = s.at("base_load").at(1).get<double>();
                }
                src.change.max_injection = s.value("max_injection", src.change.max_injection);
                cfg.synthetic = src;
            } else {
                cfg.bundle = d.at("bundle").get<std::string>();
            }
        }

        if (j.contains("hyperparameters")) {
            const json& h = j.at("hyperparameters");
            cfg.hp.lambda = h.value("lambda", cfg.hp.lambda);
            cfg.hp.alpha = h.value("alpha", cfg.hp.alpha);
            cfg.hp.epsilon = h.value("epsilon", cfg.hp.epsilon);
            cfg.hp.max_am_iters = h.value("max_am_iters", cfg.hp.max_am_iters);
            cfg.hp.inner_tol = h.value("inner_tol", cfg.hp.inner_tol);
            cfg.hp.max_inner_iters = h.value("max_inner_iters", cfg.hp.max_inner_iters);
        }
        if (j.contains("cv")) {
            const json& c = j.at("cv");
            if (c.contains("lambda_grid"))
                cfg.cv.lambda_grid = c.at("lambda_grid").get<std::vector<double>>();
            if (c.contains("alpha_grid"))
                cfg.cv.alpha_grid = c.at("alpha_grid").get<std::vector<double>>();
            cfg.cv.folds = c.value("folds", cfg.cv.folds);
            cfg.cv.seed = c.value("seed", cfg.cv.seed);
        }
        if (j.contains("ac")) {
            const json& a = j.at("ac");
            cfg.ac.tol = a.value("tol", cfg.ac.tol);
            cfg.ac.max_iter = a.value("max_iter", cfg.ac.max_iter);
            cfg.ac.max_injection = a.value("max_injection", cfg.ac.max_injection);
        }
        cfg.out = j.value("out", cfg.out);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.threads = j.value("threads", cfg.threads);
        if (cfg.synthetic) cfg.synthetic->change.seed = cfg.seed;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["feeder"] = cfg.feeder_path;
    j["mode"] = cfg.mode == ParamMode::Full ? "full" : "ratio_fixed";
    if (cfg.ratios) j["ratios"] = *cfg.ratios;
    j["truth_mode"] = cfg.truth_mode == TruthMode::Ac ? "ac" : "ldf";
    j["noise_sigma"] = cfg.noise_sigma;
    json part;
    switch (cfg.partition.kind) {
        case PartitionSpec::Kind::LeafOnly:
            part["kind"] = "leaf_only";
            break;
        case PartitionSpec::Kind::Fraction:
            part["kind"] = "fraction";
            part["fraction"] = cfg.partition.fraction;
            part["seed"] = cfg.partition.seed;
            break;
        case PartitionSpec::Kind::Explicit:
            part["kind"] = "explicit";
            part["observed"] = cfg.partition.observed_labels;
            break;
    }
    if (!cfg.partition.voltage_observed_labels.empty())
        part["voltage_observed"] = cfg.partition.voltage_observed_labels;
    j["partition"] = part;
    if (cfg.synthetic) {
        json s;
        s["T"] = cfg.synthetic->T;
        s["change_prob"] = cfg.synthetic->change.change_prob;
        s["magnitude"] = {cfg.synthetic->change.mag_lo, cfg.synthetic->change.mag_hi};
        s["power_factor"] = {cfg.synthetic->change.pf_lo, cfg.synthetic->change.pf_hi};
        s["base_load"] = {cfg.synthetic->change.base_lo, cfg.synthetic->change.base_hi};
        s["max_injection"] = cfg.synthetic->change.max_injection;
        j["data"]["synthetic"] = s;
    }
    if (cfg.bundle) j["data"]["bundle"] = *cfg.bundle;
    j["hyperparameters"] = {{"lambda", cfg.hp.lambda},
                            {"alpha", cfg.hp.alpha},
                            {"epsilon", cfg.hp.epsilon},
                            {"max_am_iters", cfg.hp.max_am_iters},
                            {"inner_tol", cfg.hp.inner_tol},
                            {"max_inner_iters", cfg.hp.max_inner_iters}};
    j["cv"] = {{"lambda_grid", cfg.cv.lambda_grid},
               {"alpha_grid", cfg.cv.alpha_grid},
               {"folds", cfg.cv.folds},
               {"seed", cfg.cv.seed}};
    j["ac"] = {{"tol", cfg.ac.tol},
               {"max_iter", cfg.ac.max_iter},
               {"max_injection", cfg.ac.max_injection}};
    j["out"] = cfg.out;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    return j.dump(2) + "\n";
}

FeederModel load_feeder(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    std::vector<LineSpec> lines;
    double v0 = 1.0;
    std::string root;
    try {
        v0 = j.value("v0", 1.0);
        root = j.value("root", std::string{});
        for (const auto& e : j.at("lines")) {
            LineSpec ls;
            // labels may be written as JSON strings or numbers
            ls.from = e.at("from").is_string() ? e.at("from").get<std::string>()
                                               : e.at("from").dump();
            ls.to = e.at("to").is_string() ? e.at("to").get<std::string>() : e.at("to").dump();
            ls.r = e.at("r").get<double>();
            ls.x = e.at("x").get<double>();
            if (e.contains("z_ratio")) ls.z_ratio = e.at("z_ratio").get<double>();
            lines.push_back(std::move(ls));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return FeederModel::build(lines, v0, root);
}

}  // namespace dgmod
