// Command-line front end: `run` trains one configuration and writes
// metrics.csv + report.json; `sweep` runs a tau/beta/gamma/labels grid in
// parallel and writes one tidy CSV of final-tick metrics.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "entropia/entropia.hpp"

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

// every override funnels through the same key=value parser as config files
struct Overrides {
    std::vector<std::pair<std::string, std::string>> kv;
    CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key,
                     const std::string& help) {
        auto setter = [this, key](const std::string& v) {
            kv.emplace_back(key, v);
            return true;
        };
        return app->add_option_function<std::string>(flag, setter, help);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropia: local-entropy training with generalization bound reporting"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;

    CLI::App* run = app.add_subcommand("run", "train one configuration");
    run->add_option("--config", config_path, "key=value config file (flags win over the file)");
    ov.add(run, "--algorithm", "algorithm", "sgd | sgld | entropy_sgd | entropy_sgld");
    ov.add(run, "--data", "data", "'synthetic' or 'idx:<dir>' with image/label files");
    ov.add(run, "--labels", "labels", "true | random");
    ov.add(run, "--tau", "tau", "inverse temperature (0 = sqrt(m), 'inf' allowed)");
    ov.add(run, "--beta", "beta", "outer-loop inverse temperature");
    ov.add(run, "--gamma", "gamma", "local-entropy coupling");
    ov.add(run, "--alpha", "alpha", "inner-loop averaging weight");
    ov.add(run, "--base-rate", "base_rate", "base learning rate before temperature scaling");
    ov.add(run, "--eta", "eta", "outer step size override");
    ov.add(run, "--eta-prime", "eta_prime", "inner step size override");
    ov.add(run, "--inner-steps", "inner_steps", "inner chain length per outer step");
    ov.add(run, "--minibatch", "minibatch", "gradient minibatch size");
    ov.add(run, "--hidden", "hidden", "comma list of hidden layer widths");
    ov.add(run, "--l-max", "l_max", "loss ceiling");
    ov.add(run, "--epochs", "epochs", "training epochs (one metrics row each)");
    ov.add(run, "--seed", "seed", "master seed");
    ov.add(run, "--subset", "subset", "train on the first N examples");
    ov.add(run, "--standardize", "standardize", "per-feature standardization (idx data)");
    ov.add(run, "--synth-m", "synth_m", "synthetic train set size");
    ov.add(run, "--synth-d", "synth_d", "synthetic input dimension");
    ov.add(run, "--separation", "separation", "synthetic class separation");
    ov.add(run, "--delta", "delta", "bound confidence parameter");
    ov.add(run, "--bound-eval-every", "bound_eval_every", "bound evaluation cadence in epochs (0 = final only)");
    ov.add(run, "--eval-chain-steps", "eval_chain_steps", "posterior chain length per evaluation");
    ov.add(run, "--eval-thin", "eval_thin", "keep every k-th chain state");
    ov.add(run, "--eval-prior-samples", "eval_prior_samples", "i.i.d. prior draws per evaluation");
    ov.add(run, "--eval-base-step", "eval_base_step", "evaluation chain base step (0 = derive)");
    ov.add(run, "--out", "out", "output directory for metrics.csv and report.json");

    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
    std::string tau_list = "0", beta_list = "1", gamma_list = "1", labels_list = "true";
    std::string sweep_out;
    int threads = 0;
    sweep->add_option("--config", config_path, "base config file for every grid point");
    sweep->add_option("--tau-list", tau_list, "comma list of tau values (0 = sqrt(m))");
    sweep->add_option("--beta-list", beta_list, "comma list of beta values");
    sweep->add_option("--gamma-list", gamma_list, "comma list of gamma values");
    sweep->add_option("--labels-list", labels_list, "comma list drawn from {true,random}");
    sweep->add_option("--threads", threads, "worker threads (default ENTROPIA_THREADS or cores)");
    sweep->add_option("--out", sweep_out, "output CSV path")->required();
    ov.add(sweep, "--algorithm", "algorithm", "sgd | sgld | entropy_sgd | entropy_sgld");
    ov.add(sweep, "--epochs", "epochs", "training epochs per point");
    ov.add(sweep, "--seed", "seed", "master seed (per-point seeds derive from it)");

    CLI11_PARSE(app, argc, argv);

    try {
        entropia::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = entropia::parse_config_file(config_path);
        for (const auto& [k, v] : ov.kv) entropia::apply_config_entry(cfg, k, v);

        if (run->parsed()) {
            entropia::ExperimentResult res = entropia::run_experiment(cfg);
            const entropia::MetricsRow& last = res.rows.back();
            std::fprintf(stderr,
                         "tick %d  train %.4f  test %.4f  gibbs train %.4f  pac %.4f  "
                         "h %.4f  c %.4f\n",
                         last.tick, last.train_err_mean, last.test_err_mean,
                         last.train_err_gibbs, last.pac_bound, last.h_bound, last.c_bound);
            std::cout << entropia::bound_report_json(res.report);
            return 0;
        }

        // cross product of the four lists
        std::vector<entropia::SweepPoint> grid;
        for (const auto& ts : split_list(tau_list))
            for (const auto& bs : split_list(beta_list))
                for (const auto& gs : split_list(gamma_list))
                    for (const auto& ls : split_list(labels_list)) {
                        entropia::SweepPoint p;
                        p.tau = (ts == "inf") ? std::numeric_limits<double>::infinity()
                                              : std::stod(ts);
                        p.beta = std::stod(bs);
                        p.gamma = std::stod(gs);
                        p.labels = ls;
                        grid.push_back(p);
                    }
        auto outcomes = entropia::run_sweep(cfg, grid, threads);
        std::ofstream f(sweep_out);
        if (!f) throw std::runtime_error("cannot write '" + sweep_out + "'");
        f << entropia::kSweepCsvHeader << "\n";
        int failed = 0;
        for (const auto& o : outcomes) {
            f << entropia::sweep_outcome_csv(o) << "\n";
            if (!o.ok) ++failed;
        }
        std::fprintf(stderr, "sweep: %zu points, %d failed, wrote %s\n", outcomes.size(),
                     failed, sweep_out.c_str());
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
