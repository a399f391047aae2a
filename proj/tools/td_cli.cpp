#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "td/harness/drivers.hpp"
#include "td/harness/scenarios.hpp"

using namespace td::harness;

namespace {

struct Flags {
    std::string config;
    std::uint64_t seed = 1;
    std::optional<int> runs;
    std::optional<int> steps;
    std::string out = "out";
    std::string checkpoint;
    std::optional<double> epsilon;
    bool blocked = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Random seed");
    cmd->add_option("--runs", f.runs, "Evaluation episodes")->check(CLI::NonNegativeNumber);
    cmd->add_option("--steps", f.steps, "Training steps (overrides the config)");
    cmd->add_option("--out", f.out, "Output directory");
}

DriverOptions options(const Flags& f, ScenarioConfig fallback, int defaultRuns) {
    DriverOptions o;
    o.config = f.config.empty() ? std::move(fallback) : load_config(f.config);
    o.seed = f.seed;
    o.runs = f.runs.value_or(defaultRuns);
    o.steps = f.steps;
    o.out = f.out;
    if (!f.checkpoint.empty()) o.checkpoint = f.checkpoint;
    o.epsilon = f.epsilon;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driving-tendency MPC with a soft actor-critic tendency policy"};
    app.require_subcommand(1);
    Flags f;

    auto* train = app.add_subcommand("train", "Train the tendency policy; optionally evaluate it");
    add_common(train, f);

    auto* eval = app.add_subcommand("eval", "Evaluate the tendency policy (trains first without --checkpoint)");
    add_common(eval, f);
    eval->add_option("--checkpoint", f.checkpoint, "Trained agent")->check(CLI::ExistingFile);

    auto* bmpc = app.add_subcommand("baseline-mpc", "Evaluate the middle-lane speed-maximising MPC");
    add_common(bmpc, f);

    auto* brl = app.add_subcommand("baseline-rl", "Train and evaluate the polynomial-trajectory RL agent");
    add_common(brl, f);
    brl->add_option("--checkpoint", f.checkpoint, "Trained agent")->check(CLI::ExistingFile);

    auto* stat = app.add_subcommand("scenario-static", "Run the static-obstacle scenario");
    add_common(stat, f);
    stat->add_option("--checkpoint", f.checkpoint, "Trained agent")->check(CLI::ExistingFile);
    stat->add_option("--epsilon", f.epsilon, "Fixed tendency instead of a trained agent (default -1)")
        ->check(CLI::Range(-1.0, 1.0));
    stat->add_flag("--blocked", f.blocked, "Close every lane at the end of the route");

    auto* dyn = app.add_subcommand("scenario-dynamic", "Run the cut-in scenario");
    add_common(dyn, f);
    dyn->add_option("--checkpoint", f.checkpoint, "Trained agent")->check(CLI::ExistingFile);
    dyn->add_option("--epsilon", f.epsilon, "Fixed tendency instead of a trained agent (default 0)")
        ->check(CLI::Range(-1.0, 1.0));

    std::vector<std::string> logs;
    std::string curveOut = "out";
    auto* curve = app.add_subcommand("curve", "Learning curve over training logs of several seeds");
    curve->add_option("--log", logs, "training_log.csv (repeatable)")->required()->check(CLI::ExistingFile);
    curve->add_option("--out", curveOut, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        DriverResult r;
        if (train->parsed()) {
            r = run_proposed(options(f, default_scenario(), 0));
        } else if (eval->parsed()) {
            auto o = options(f, default_scenario(), 30);
            if (o.runs < 1) throw std::invalid_argument("eval needs --runs >= 1");
            r = run_proposed(std::move(o));
        } else if (bmpc->parsed()) {
            r = run_baseline_mpc(options(f, default_scenario(), 30));
        } else if (brl->parsed()) {
            r = run_baseline_rl(options(f, default_scenario(), 30));
        } else if (stat->parsed() || dyn->parsed()) {
            auto o = options(f, stat->parsed() ? static_scenario(f.blocked) : dynamic_scenario(), 1);
            if (o.runs < 1) throw std::invalid_argument("scenarios need --runs >= 1");
            if (!o.checkpoint && !o.epsilon) o.epsilon = stat->parsed() ? -1.0 : 0.0;
            r = run_proposed(std::move(o), stat->parsed() ? "scenario_static" : "scenario_dynamic");
        } else if (curve->parsed()) {
            run_curve({logs.begin(), logs.end()}, curveOut);
            return 0;
        }
        std::cout << r.metrics.dump(2) << '\n';
        if (!r.ok) {
            std::cerr << "error: training aborted\n";
            return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
