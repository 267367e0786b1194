#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dgmod/commands.hpp"

namespace {

struct GlobalFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

dgmod::ExperimentConfig resolve(const GlobalFlags& g, bool need_config = true) {
    dgmod::ExperimentConfig cfg;
    if (!g.config.empty())
        cfg = dgmod::load_config(g.config);
    else if (need_config)
        throw dgmod::ConfigError("missing --config");
    if (!g.out.empty()) cfg.out = g.out;
    if (g.seed) {
        cfg.seed = *g.seed;
        if (cfg.synthetic) cfg.synthetic->change.seed = *g.seed;
    }
    if (g.threads) cfg.threads = *g.threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distribution feeder line-parameter estimation from partial observations"};
    app.require_subcommand(1);

    GlobalFlags g;
    std::uint64_t seed_arg = 0;
    int threads_arg = 0;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", g.config, "experiment config JSON");
        sub->add_option("--out", g.out, "output directory override");
        sub->add_option("--seed", seed_arg, "seed override")->each([&](const std::string&) {
            g.seed = seed_arg;
        });
        sub->add_option("--threads", threads_arg, "worker thread cap")
            ->each([&](const std::string&) { g.threads = threads_arg; });
    };

    auto* generate = app.add_subcommand("generate", "write a synthetic dataset bundle");
    add_common(generate);

    auto* estimate = app.add_subcommand("estimate", "run the ZI and AM estimators");
    add_common(estimate);
    int dump_step = -1;
    auto* dump_opt =
        estimate->add_option("--dump-regression", dump_step, "also dump the regression matrix "
                                                             "of one timestep as CSV");

    auto* cv = app.add_subcommand("cv", "k-fold hyperparameter selection");
    add_common(cv);

    auto* validate = app.add_subcommand("validate", "held-out voltage prediction errors");
    add_common(validate);
    std::string report_path, holdout_path;
    validate->add_option("--report", report_path, "report.json from estimate")->required();
    validate->add_option("--holdout", holdout_path, "holdout dataset bundle")->required();

    auto* powerflow = app.add_subcommand("powerflow", "per-bus ac voltage magnitudes as CSV");
    add_common(powerflow);

    auto* defaults = app.add_subcommand("defaults", "print the default config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (defaults->parsed()) {
            std::cout << dgmod::config_to_json(dgmod::default_config());
            return 0;
        }
        if (generate->parsed()) {
            dgmod::cmd_generate(resolve(g));
        } else if (estimate->parsed()) {
            std::optional<int> dump;
            if (dump_opt->count() > 0) dump = dump_step;
            dgmod::cmd_estimate(resolve(g), dump);
        } else if (cv->parsed()) {
            dgmod::cmd_cv(resolve(g));
        } else if (validate->parsed()) {
            dgmod::cmd_validate(resolve(g), report_path, holdout_path);
        } else if (powerflow->parsed()) {
            dgmod::cmd_powerflow(resolve(g), std::cout);
        }
    } catch (const dgmod::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dgmod::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const dgmod::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
