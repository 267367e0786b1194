#include "dgmod/commands.hpp"

#include <fstream>
#include <iostream>

#include "dgmod/csv.hpp"
#include "dgmod/rng.hpp"
#include "dgmod/version.hpp"
#include "json.hpp"

namespace dgmod {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fnv1a64_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed while writing " + path.string());
}

void copy_file_bytes(const fs::path& from, const fs::path& to) {
    std::ifstream in(from, std::ios::binary);
    if (!in) throw IoError("cannot open " + from.string());
    std::ofstream out(to, std::ios::binary);
    if (!out) throw IoError("cannot open " + to.string() + " for writing");
    out << in.rdbuf();
    if (!out) throw IoError("failed while copying to " + to.string());
}

std::vector<std::string> bus_labels(const FeederModel& feeder) {
    std::vector<std::string> labels(feeder.size());
    for (int n = 1; n <= feeder.size(); ++n) labels[n - 1] = feeder.label(n);
    return labels;
}

std::vector<std::string> labels_of(const FeederModel& feeder, const std::vector<int>& buses) {
    std::vector<std::string> out;
    out.reserve(buses.size());
    for (int n : buses) out.push_back(feeder.label(n));
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return j;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// manifest shared by every command output directory
json manifest_base(const ExperimentConfig& cfg) {
    json m;
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["hyperparameters"] = {{"lambda", cfg.hp.lambda},
                            {"alpha", cfg.hp.alpha},
                            {"epsilon", cfg.hp.epsilon},
                            {"max_am_iters", cfg.hp.max_am_iters},
                            {"inner_tol", cfg.hp.inner_tol},
                            {"max_inner_iters", cfg.hp.max_inner_iters}};
    return m;
}

void finish_manifest(json m, const fs::path& dir, const std::vector<std::string>& files) {
    for (const auto& f : files) m["outputs"][f] = fnv1a64_hex(dir / f);
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

struct LoadedExperiment {
    FeederModel feeder;
    DifferenceDataset dataset;
    LoadSeries loads;
    bool truth_known = false;
};

LoadedExperiment load_experiment(const ExperimentConfig& cfg) {
    if (cfg.bundle) {
        Bundle b = read_bundle(*cfg.bundle);
        LoadedExperiment e{std::move(b.feeder), DifferenceDataset{}, std::move(b.loads),
                           b.synthetic_truth};
        e.dataset = make_differences(e.loads, b.v_samples, std::move(b.partition));
        return e;
    }
    if (!cfg.synthetic) throw ConfigError("config names no data source");
    FeederModel feeder = load_feeder(cfg.feeder_path);
    SparseChangeConfig change = cfg.synthetic->change;
    change.seed = cfg.seed;
    LoadSeries loads = synth_loads(feeder, change, cfg.synthetic->T);
    ObservabilityPartition part = make_partition(feeder, cfg.partition);
    DifferenceDataset ds = generate_dataset(feeder, loads, std::move(part), cfg.truth_mode,
                                            cfg.noise_sigma, cfg.seed + 1, cfg.ac);
    return LoadedExperiment{std::move(feeder), std::move(ds), std::move(loads), true};
}

EstimationProblem make_problem(const ExperimentConfig& cfg, const FeederModel& feeder,
                               const DifferenceDataset& dataset) {
    Eigen::VectorXd ratios;
    if (cfg.mode == ParamMode::RatioFixed && cfg.ratios) ratios = to_vector(*cfg.ratios);
    return EstimationProblem(feeder, dataset, cfg.mode, std::move(ratios));
}

Eigen::VectorXd true_theta(const FeederModel& feeder, ParamMode mode) {
    if (mode == ParamMode::RatioFixed) return feeder.reactance();
    Eigen::VectorXd th(2 * feeder.size());
    th << feeder.resistance(), feeder.reactance();
    return th;
}

json theta_json(const ParamVector& p) {
    return std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
}

ParamVector theta_from_json(const json& j, ParamMode mode, const Eigen::VectorXd& ratios) {
    ParamVector p;
    p.mode = mode;
    p.theta = to_vector(j.get<std::vector<double>>());
    p.ratios = ratios;
    return p;
}

}  // namespace

void write_bundle(const fs::path& dir, const fs::path& feeder_src, const FeederModel& feeder,
                  const LoadSeries& loads, const Eigen::MatrixXd& v_samples,
                  const ObservabilityPartition& partition, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    copy_file_bytes(feeder_src, dir / "feeder.json");
    const auto labels = bus_labels(feeder);
    write_csv(dir / "p.csv", labels, loads.p);
    write_csv(dir / "q.csv", labels, loads.q);
    write_csv(dir / "v.csv", labels, v_samples);

    json part;
    part["observed"] = labels_of(feeder, partition.observed);
    part["voltage_observed"] = labels_of(feeder, partition.voltage_observed);
    write_text(dir / "partition.json", part.dump(2) + "\n");

    json m = manifest_base(cfg);
    m["kind"] = "dataset";
    m["synthetic_truth"] = true;
    m["truth_mode"] = cfg.truth_mode == TruthMode::Ac ? "ac" : "ldf";
    m["noise_sigma"] = cfg.noise_sigma;
    m["T"] = static_cast<int>(loads.steps());
    m["inputs"]["feeder"] = fnv1a64_hex(feeder_src);
    if (cfg.synthetic) {
        m["generator"] = {{"change_prob", cfg.synthetic->change.change_prob},
                          {"magnitude", {cfg.synthetic->change.mag_lo, cfg.synthetic->change.mag_hi}},
                          {"power_factor", {cfg.synthetic->change.pf_lo, cfg.synthetic->change.pf_hi}},
                          {"base_load", {cfg.synthetic->change.base_lo, cfg.synthetic->change.base_hi}},
                          {"max_injection", cfg.synthetic->change.max_injection}};
    }
    finish_manifest(std::move(m), dir,
                    {"feeder.json", "p.csv", "q.csv", "v.csv", "partition.json"});
}

Bundle read_bundle(const fs::path& dir) {
    Bundle b{load_feeder(dir / "feeder.json"), {}, {}, {}, false};
    IngestedSeries series = ingest_csv(b.feeder, dir / "p.csv", dir / "q.csv", dir / "v.csv");
    b.loads = std::move(series.loads);
    b.v_samples = std::move(series.v_samples);

    const json part = read_json_file(dir / "partition.json");
    PartitionSpec spec;
    spec.kind = PartitionSpec::Kind::Explicit;
    try {
        spec.observed_labels = part.at("observed").get<std::vector<std::string>>();
        if (part.contains("voltage_observed"))
            spec.voltage_observed_labels =
                part.at("voltage_observed").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw IoError((dir / "partition.json").string() + ": " + e.what());
    }
    b.partition = make_partition(b.feeder, spec);

    if (fs::exists(dir / "manifest.json")) {
        const json m = read_json_file(dir / "manifest.json");
        b.synthetic_truth = m.value("synthetic_truth", false);
    }
    return b;
}

void cmd_generate(const ExperimentConfig& cfg) {
    if (!cfg.synthetic) throw ConfigError("generate needs a synthetic data source");
    FeederModel feeder = load_feeder(cfg.feeder_path);
    SparseChangeConfig change = cfg.synthetic->change;
    change.seed = cfg.seed;
    const LoadSeries loads = synth_loads(feeder, change, cfg.synthetic->T);
    const ObservabilityPartition part = make_partition(feeder, cfg.partition);
    Eigen::MatrixXd v = voltage_series(feeder, loads, cfg.truth_mode, cfg.ac);
    if (cfg.noise_sigma > 0.0) {
        Rng rng(cfg.seed + 1);
        for (Eigen::Index t = 0; t < v.rows(); ++t)
            for (Eigen::Index n = 0; n < v.cols(); ++n) v(t, n) += cfg.noise_sigma * rng.normal();
    }
    write_bundle(cfg.out, cfg.feeder_path, feeder, loads, v, part, cfg);
}

void cmd_estimate(const ExperimentConfig& cfg, std::optional<int> dump_regression_step) {
    const LoadedExperiment exp = load_experiment(cfg);
    const EstimationProblem prob = make_problem(cfg, exp.feeder, exp.dataset);

    const AmState st = am_solve(prob, cfg.hp, cfg.threads);

    json rep;
    rep["mode"] = cfg.mode == ParamMode::Full ? "full" : "ratio_fixed";
    rep["lambda"] = cfg.hp.lambda;
    rep["alpha"] = cfg.hp.alpha;
    rep["theta"] = theta_json(st.theta);
    rep["iterations"] = st.iterations;
    rep["converged"] = st.converged;
    rep["objective_trace"] = st.objective_trace;
    rep["group_sparsity_per_t"] = group_sparsity_per_step(st.s_u);
    rep["zi"]["theta"] = theta_json(st.theta_zi);
    if (cfg.mode == ParamMode::RatioFixed) {
        const Eigen::VectorXd& z = prob.ratios();
        rep["ratios"] = std::vector<double>(z.data(), z.data() + z.size());
    }

    if (exp.truth_known) {
        const Eigen::VectorXd truth = true_theta(exp.feeder, cfg.mode);
        rep["tve"] = total_vector_error(st.theta.theta, truth);
        rep["zi"]["tve"] = total_vector_error(st.theta_zi.theta, truth);
    } else {
        rep["tve"] = nullptr;
        rep["zi"]["tve"] = nullptr;
    }

    const Eigen::MatrixXd m = incidence(exp.feeder);
    rep["diagnostics"]["incidence_condition_number"] = condition_number(m);
    {
        // stacked-design numerical rank over a bounded number of steps
        const int probe = std::min(prob.steps(), std::max(1, 4 * prob.params() /
                                                                  std::max<int>(1, prob.rows().size())));
        Eigen::MatrixXd stacked(probe * static_cast<int>(prob.rows().size()), prob.params());
        for (int t = 0; t < probe; ++t)
            stacked.middleRows(t * prob.rows().size(), prob.rows().size()) =
                prob.design_row_block(t, nullptr);
        rep["diagnostics"]["design_rank"] = numerical_rank(stacked);
        rep["diagnostics"]["design_cols"] = prob.params();
    }

    fs::create_directories(cfg.out);
    write_text(fs::path(cfg.out) / "report.json", rep.dump(2) + "\n");

    // per-line reactance comparison, the data behind a bar-chart figure
    {
        const int L = exp.feeder.size();
        Eigen::MatrixXd cmp(L, exp.truth_known ? 3 : 2);
        std::vector<std::string> cols;
        const Eigen::VectorXd x_am = st.theta.reactance();
        const Eigen::VectorXd x_zi = st.theta_zi.reactance();
        cmp.col(0) = x_am;
        cmp.col(1) = x_zi;
        cols = {"x_am", "x_zi"};
        if (exp.truth_known) {
            cmp.col(2) = exp.feeder.reactance();
            cols.push_back("x_true");
        }
        write_csv(fs::path(cfg.out) / "reactance_comparison.csv", cols, cmp);
    }

    if (dump_regression_step) {
        const int t = *dump_regression_step;
        if (t < 0 || t >= exp.dataset.steps())
            throw ConfigError("--dump-regression step out of range");
        const Eigen::VectorXd* z = cfg.mode == ParamMode::RatioFixed ? &prob.ratios() : nullptr;
        const Eigen::MatrixXd a =
            assemble_regression(exp.feeder, exp.dataset.dp.row(t).transpose(),
                                exp.dataset.dq.row(t).transpose(), cfg.mode, z);
        std::vector<std::string> cols;
        for (int l = 1; l <= exp.feeder.size(); ++l)
            if (cfg.mode == ParamMode::Full) cols.push_back("r_" + std::to_string(l));
        for (int l = 1; l <= exp.feeder.size(); ++l) cols.push_back("x_" + std::to_string(l));
        write_csv(fs::path(cfg.out) / ("regression_t" + std::to_string(t) + ".csv"), cols, a);
    }

    json m2 = manifest_base(cfg);
    m2["kind"] = "estimate";
    m2["inputs"]["feeder"] = fnv1a64_hex(cfg.feeder_path);
    if (cfg.bundle)
        for (const char* f : {"p.csv", "q.csv", "v.csv", "partition.json", "feeder.json"})
            m2["inputs"][std::string("bundle/") + f] = fnv1a64_hex(fs::path(*cfg.bundle) / f);
    std::vector<std::string> outs{"report.json", "reactance_comparison.csv"};
    if (dump_regression_step)
        outs.push_back("regression_t" + std::to_string(*dump_regression_step) + ".csv");
    finish_manifest(std::move(m2), cfg.out, outs);

    std::cerr << "am tve=" << (exp.truth_known ? std::to_string(rep["tve"].get<double>()) : "n/a")
              << " iterations=" << st.iterations << " converged=" << st.converged << "\n";
}

void cmd_cv(const ExperimentConfig& cfg) {
    const LoadedExperiment exp = load_experiment(cfg);
    const EstimationProblem prob = make_problem(cfg, exp.feeder, exp.dataset);
    const CvResult res = cross_validate(prob, cfg.cv.lambda_grid, cfg.cv.alpha_grid, cfg.cv.folds,
                                        cfg.cv.seed, cfg.hp, cfg.threads);
    json j;
    j["selected"] = {{"lambda", res.lambda}, {"alpha", res.alpha}};
    j["folds"] = cfg.cv.folds;
    for (const auto& row : res.table)
        j["table"].push_back({{"lambda", row.lambda},
                              {"alpha", row.alpha},
                              {"fold_scores", row.fold_scores},
                              {"mean_score", row.mean_score}});
    fs::create_directories(cfg.out);
    write_text(fs::path(cfg.out) / "cv.json", j.dump(2) + "\n");
    json m = manifest_base(cfg);
    m["kind"] = "cv";
    m["inputs"]["feeder"] = fnv1a64_hex(cfg.feeder_path);
    m["cv"] = {{"lambda_grid", cfg.cv.lambda_grid},
               {"alpha_grid", cfg.cv.alpha_grid},
               {"folds", cfg.cv.folds},
               {"seed", cfg.cv.seed}};
    finish_manifest(std::move(m), cfg.out, {"cv.json"});
    std::cout << "selected lambda=" << res.lambda << " alpha=" << res.alpha << "\n";
}

void cmd_validate(const ExperimentConfig& cfg, const fs::path& report_path,
                  const fs::path& holdout_bundle) {
    const json rep = read_json_file(report_path);
    Bundle holdout = read_bundle(holdout_bundle);

    ParamMode mode = ParamMode::RatioFixed;
    try {
        mode = rep.at("mode").get<std::string>() == "full" ? ParamMode::Full
                                                           : ParamMode::RatioFixed;
        Eigen::VectorXd ratios;
        if (mode == ParamMode::RatioFixed) {
            if (rep.contains("ratios"))
                ratios = to_vector(rep.at("ratios").get<std::vector<double>>());
            else
                ratios = holdout.feeder.ratios();
        }
        const ParamVector am = theta_from_json(rep.at("theta"), mode, ratios);
        const ParamVector zi = theta_from_json(rep.at("zi").at("theta"), mode, ratios);

        const Eigen::VectorXd err_am = validate_voltage(holdout.feeder, am, holdout.loads, cfg.ac);
        const Eigen::VectorXd err_zi = validate_voltage(holdout.feeder, zi, holdout.loads, cfg.ac);

        Eigen::MatrixXd table(err_am.size(), 2);
        table.col(0) = err_am;
        table.col(1) = err_zi;
        fs::create_directories(cfg.out);
        write_csv(fs::path(cfg.out) / "voltage_error.csv", {"am", "zi"}, table);

        json m = manifest_base(cfg);
        m["kind"] = "validate";
        m["inputs"]["report"] = fnv1a64_hex(report_path);
        for (const char* f : {"p.csv", "q.csv", "v.csv", "feeder.json"})
            m["inputs"][std::string("holdout/") + f] = fnv1a64_hex(holdout_bundle / f);
        finish_manifest(std::move(m), cfg.out, {"voltage_error.csv"});
        std::cout << "mean voltage error am=" << err_am.mean() << " zi=" << err_zi.mean() << "\n";
    } catch (const json::exception& e) {
        throw ConfigError(report_path.string() + ": " + e.what());
    }
}

void cmd_powerflow(const ExperimentConfig& cfg, std::ostream& out) {
    if (cfg.bundle) {
        Bundle b = read_bundle(*cfg.bundle);
        Eigen::MatrixXd v(b.loads.samples(), b.feeder.size());
        for (int t = 0; t < b.loads.samples(); ++t) {
            InjectionState inj{b.loads.p.row(t).transpose(), b.loads.q.row(t).transpose()};
            v.row(t) = ac_power_flow(b.feeder, inj, cfg.ac).v.transpose();
        }
        const auto labels = bus_labels(b.feeder);
        for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? "," : "") << labels[i];
        out << "\n";
        for (Eigen::Index t = 0; t < v.rows(); ++t) {
            for (Eigen::Index n = 0; n < v.cols(); ++n)
                out << (n ? "," : "") << format_double(v(t, n));
            out << "\n";
        }
        return;
    }
    // no data source: flat unloaded solve as a feeder sanity check
    FeederModel feeder = load_feeder(cfg.feeder_path);
    InjectionState inj{Eigen::VectorXd::Zero(feeder.size()), Eigen::VectorXd::Zero(feeder.size())};
    const VoltageState v = ac_power_flow(feeder, inj, cfg.ac);
    const auto labels = bus_labels(feeder);
    for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? "," : "") << labels[i];
    out << "\n";
    for (Eigen::Index n = 0; n < v.v.size(); ++n) out << (n ? "," : "") << format_double(v.v(n));
    out << "\n";
}

}  // namespace dgmod
