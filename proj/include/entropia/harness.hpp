#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "entropia/bounds.hpp"
#include "entropia/data.hpp"
#include "entropia/gibbs.hpp"
#include "entropia/nn.hpp"
#include "entropia/optim.hpp"

namespace entropia {

// Everything needed to reproduce one training run. Any field can be set from
// a key=value config file or a CLI override; every field except the data
// source has a usable default. tau = 0 derives sqrt(m) at run time.
struct ExperimentConfig {
    Algorithm algorithm = Algorithm::entropy_sgld;
    std::string data = "synthetic";  // "synthetic" or "idx:<dir>"
    int synth_m = 2000;
    int synth_d = 20;
    double separation = 6.0;
    int subset_n = 0;  // 0 = all
    bool standardize = false;
    std::string labels = "true";  // "true" | "random"
    std::vector<int> hidden = {16};
    LocalEntropyConfig le;
    double l_max = 4.0;
    double ramp_slope = 1e6;
    int epochs = 50;
    int bound_eval_every = 10;  // 0 = final tick only
    std::int64_t eval_chain_steps = 2000;
    int eval_thin = 4;
    std::int64_t eval_prior_samples = 400;
    double eval_base_step = 0.0;  // 0 = derive 1/(tau*(1+gamma))
    double delta = 0.05;
    std::uint64_t seed = 1234;
    std::string out_dir;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
        if (!(delta > 0.0) || !(delta < 1.0))
            throw std::invalid_argument("config: delta must lie in (0,1)");
        if (labels != "true" && labels != "random")
            throw std::invalid_argument("config: labels must be 'true' or 'random'");
        if (data != "synthetic" && data.rfind("idx:", 0) != 0)
            throw std::invalid_argument("config: data must be 'synthetic' or 'idx:<dir>'");
        if (eval_chain_steps < 10) throw std::invalid_argument("config: eval_chain_steps too small");
        if (eval_thin < 1) throw std::invalid_argument("config: eval_thin must be >= 1");
        if (eval_prior_samples < 2)
            throw std::invalid_argument("config: eval_prior_samples must be >= 2");
        if (bound_eval_every < 0) throw std::invalid_argument("config: bound_eval_every >= 0");
        if (hidden.empty()) throw std::invalid_argument("config: need at least one hidden width");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("config: hidden widths must be positive");
    }
};

// Apply one key=value setting; throws on unknown keys or unparsable values.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    auto as_double = [&](const std::string& v) {
        std::size_t pos = 0;
        double d;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad number '" + v + "' for key '" + key + "'");
        }
        if (pos != v.size())
            throw std::invalid_argument("config: bad number '" + v + "' for key '" + key + "'");
        return d;
    };
    auto as_int = [&](const std::string& v) {
        const double d = as_double(v);
        if (d != std::floor(d))
            throw std::invalid_argument("config: expected integer for key '" + key + "'");
        return static_cast<long long>(d);
    };

    if (key == "algorithm") cfg.algorithm = algorithm_from_name(value);
    else if (key == "data") cfg.data = value;
    else if (key == "synth_m") cfg.synth_m = static_cast<int>(as_int(value));
    else if (key == "synth_d") cfg.synth_d = static_cast<int>(as_int(value));
    else if (key == "separation") cfg.separation = as_double(value);
    else if (key == "subset") cfg.subset_n = static_cast<int>(as_int(value));
    else if (key == "standardize") cfg.standardize = (value == "1" || value == "true");
    else if (key == "labels") cfg.labels = value;
    else if (key == "hidden") {
        cfg.hidden.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) cfg.hidden.push_back(static_cast<int>(as_int(tok)));
    } else if (key == "gamma") cfg.le.gamma = as_double(value);
    else if (key == "tau") cfg.le.tau = (value == "inf") ? std::numeric_limits<double>::infinity()
                                                         : as_double(value);
    else if (key == "beta") cfg.le.beta = as_double(value);
    else if (key == "inner_steps") cfg.le.inner_steps = static_cast<int>(as_int(value));
    else if (key == "minibatch") cfg.le.minibatch = static_cast<int>(as_int(value));
    else if (key == "alpha") cfg.le.alpha = as_double(value);
    else if (key == "base_rate") cfg.le.base_rate = as_double(value);
    else if (key == "eta") cfg.le.eta = as_double(value);
    else if (key == "eta_prime") cfg.le.eta_prime = as_double(value);
    else if (key == "l_max") cfg.l_max = as_double(value);
    else if (key == "ramp_slope") cfg.ramp_slope = as_double(value);
    else if (key == "epochs") cfg.epochs = static_cast<int>(as_int(value));
    else if (key == "bound_eval_every") cfg.bound_eval_every = static_cast<int>(as_int(value));
    else if (key == "eval_chain_steps") cfg.eval_chain_steps = as_int(value);
    else if (key == "eval_thin") cfg.eval_thin = static_cast<int>(as_int(value));
    else if (key == "eval_prior_samples") cfg.eval_prior_samples = as_int(value);
    else if (key == "eval_base_step") cfg.eval_base_step = as_double(value);
    else if (key == "delta") cfg.delta = as_double(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int(value));
    else if (key == "out") cfg.out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

// Flat key=value file; '#' starts a comment, blank lines are skipped.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " of '" + path + "' is not key=value");
        apply_config_entry(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return cfg;
}

// One CSV row; bound columns hold the most recent evaluation (bounds are
// refreshed on evaluation ticks and carried forward in between).
struct MetricsRow {
    int tick = 0;
    double train_err_mean = 0.0;
    double test_err_mean = 0.0;
    double train_err_gibbs = 0.0;
    double test_err_gibbs = 0.0;
    double pac_bound = 1.0;
    double h_bound = 1.0;
    double c_bound = 1.0;
    double kl_estimate = 0.0;
    double epsilon = 0.0;
    double wall_seconds = 0.0;
};

inline constexpr const char* kMetricsCsvHeader =
    "tick,train_err_mean,test_err_mean,train_err_gibbs,test_err_gibbs,"
    "pac_bound,h_bound,c_bound,kl_estimate,epsilon,wall_seconds";

namespace detail {

inline std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace detail

inline std::string metrics_row_csv(const MetricsRow& r) {
    using detail::g9;
    std::string s = std::to_string(r.tick);
    for (double v : {r.train_err_mean, r.test_err_mean, r.train_err_gibbs, r.test_err_gibbs,
                     r.pac_bound, r.h_bound, r.c_bound, r.kl_estimate, r.epsilon,
                     r.wall_seconds}) {
        s += ',';
        s += g9(v);
    }
    return s;
}

// Final bound evaluation of a run, serializable as a flat JSON object.
// `optimistic` records that the slack for imperfect optimisation of the prior
// center is taken to be zero; `vacuous` that some clamped bound hit 1.
struct BoundReport {
    double emp_err_mean = 0.0;
    double emp_err_gibbs = 0.0;
    double kl_estimate = 0.0;
    double kl_std_error = 0.0;
    double pac_bayes_bound = 1.0;
    double h_bound = 1.0;
    double c_bound = 1.0;
    double epsilon = 0.0;
    double m = 0.0;
    double delta = 0.05;
    bool vacuous = false;
    bool optimistic = true;
};

inline std::string bound_report_json(const BoundReport& r) {
    auto num = [](double v) {
        if (std::isinf(v)) return std::string(v > 0 ? "\"infinity\"" : "\"-infinity\"");
        if (std::isnan(v)) return std::string("\"nan\"");
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string s = "{\n";
    s += "  \"schema_version\": 1,\n";
    s += "  \"emp_err_mean\": " + num(r.emp_err_mean) + ",\n";
    s += "  \"emp_err_gibbs\": " + num(r.emp_err_gibbs) + ",\n";
    s += "  \"kl_estimate\": " + num(r.kl_estimate) + ",\n";
    s += "  \"kl_std_error\": " + num(r.kl_std_error) + ",\n";
    s += "  \"pac_bayes_bound\": " + num(r.pac_bayes_bound) + ",\n";
    s += "  \"h_bound\": " + num(r.h_bound) + ",\n";
    s += "  \"c_bound\": " + num(r.c_bound) + ",\n";
    s += "  \"epsilon\": " + num(r.epsilon) + ",\n";
    s += "  \"m\": " + num(r.m) + ",\n";
    s += "  \"delta\": " + num(r.delta) + ",\n";
    s += std::string("  \"vacuous\": ") + (r.vacuous ? "true" : "false") + ",\n";
    s += std::string("  \"optimistic\": ") + (r.optimistic ? "true" : "false") + "\n";
    s += "}\n";
    return s;
}

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    BoundReport report;
    WeightVector weights;
    NetworkSpec spec;
    LocalEntropyConfig le;  // resolved (tau filled in)
    PrivacyBudget privacy;
    int train_m = 0;
};

namespace detail {

struct RiskTriple {
    double zero_one = 0.0;
    double ramp = 0.0;
    double bce = 0.0;
};

// one forward pass per example, three losses read off the output
inline RiskTriple multi_risk(const NetworkSpec& spec, const WeightVector& w,
                             const LabeledDataset& data, double l_max, double ramp_slope,
                             Scratch& s) {
    RiskTriple t;
    const Loss l0 = Loss::zero_one();
    const Loss lr = Loss::ramp(ramp_slope);
    const Loss lb = Loss::bounded_ce(l_max);
    for (int i = 0; i < data.m; ++i) {
        forward_into(spec, w, data.example(i), s, false);
        t.zero_one += loss_from_output(l0, spec, s.a0, data.y[i]);
        t.ramp += loss_from_output(lr, spec, s.a0, data.y[i]);
        t.bce += loss_from_output(lb, spec, s.a0, data.y[i]);
    }
    t.zero_one /= data.m;
    t.ramp /= data.m;
    t.bce /= data.m;
    return t;
}

inline double ema_of(const std::vector<double>& v, double alpha) {
    double e = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) e = (1.0 - alpha) * e + alpha * v[i];
    return e;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

inline PrivacyBudget derive_privacy(Algorithm alg, const LocalEntropyConfig& le, double l_max,
                                    double m, double delta) {
    switch (alg) {
        case Algorithm::entropy_sgd:
        case Algorithm::entropy_sgld:
            return epsilon_local_entropy(le.beta, le.tau, l_max, m, delta);
        case Algorithm::sgld:
            if (std::isinf(le.tau)) break;
            return epsilon_gibbs_posterior(le.tau, l_max, m, delta);
        case Algorithm::sgd:
            break;
    }
    PrivacyBudget b;  // not a private mechanism: infinite budget, bounds go vacuous
    b.epsilon = std::numeric_limits<double>::infinity();
    b.delta = delta;
    b.tau = le.tau;
    b.l_max = l_max;
    b.m = m;
    return b;
}

// Runs training, evaluates errors each tick and bounds on evaluation ticks,
// and (when out_dir is set) streams metrics.csv row by row and writes
// report.json at the end. Identical configs give identical outputs except for
// the wall_seconds column.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    // data
    LabeledDataset train, test;
    if (cfg.data == "synthetic") {
        auto pair = synthetic_gaussians(cfg.synth_m, cfg.synth_d, cfg.separation, cfg.seed);
        train = std::move(pair.first);
        test = std::move(pair.second);
    } else {
        const std::string dir = cfg.data.substr(4);
        train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte",
                         cfg.standardize);
        test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte",
                        cfg.standardize);
        binarize_labels(train);
        binarize_labels(test);
    }
    if (cfg.subset_n > 0) train = subset(train, cfg.subset_n);
    if (cfg.labels == "random") randomize_labels(train, splitmix64(cfg.seed ^ 0x6c6162656cULL));

    ExperimentResult res;
    res.train_m = train.m;
    res.le = cfg.le;
    if (res.le.tau == 0.0) res.le.tau = std::sqrt(static_cast<double>(train.m));

    res.spec.layer_widths.clear();
    res.spec.layer_widths.push_back(train.d);
    for (int h : cfg.hidden) res.spec.layer_widths.push_back(h);
    res.spec.layer_widths.push_back(1);
    res.spec.output_kind = OutputKind::sigmoid_binary;
    res.spec.validate();

    res.privacy = derive_privacy(cfg.algorithm, res.le, cfg.l_max, train.m, cfg.delta);

    std::ofstream csv;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        csv.open(cfg.out_dir + "/metrics.csv");
        if (!csv) throw std::runtime_error("cannot write to '" + cfg.out_dir + "'");
        csv << kMetricsCsvHeader << "\n" << std::flush;
    }

    const double eval_base =
        cfg.eval_base_step > 0.0 ? cfg.eval_base_step
                                 : 1.0 / (res.le.tau * (1.0 + res.le.gamma));
    const ScheduleSpec eval_sched{eval_base, 0.6};
    const bool finite_tau = std::isfinite(res.le.tau);

    // carried between evaluation ticks
    MetricsRow carry;
    carry.epsilon = res.privacy.epsilon;
    bool evaluated = false;

    auto evaluate_bounds = [&](int tick, const WeightVector& w) {
        RngStream eval_rng = RngStream(cfg.seed).derive(0xe7a1ULL * 1000003ULL + tick);
        detail::Scratch scratch;

        if (!finite_tau) {  // zero-noise limit: the "posterior" is the point mass at w
            const auto tr = detail::multi_risk(res.spec, w, train, cfg.l_max, cfg.ramp_slope,
                                               scratch);
            carry.train_err_gibbs = tr.zero_one;
            carry.test_err_gibbs = mean_classifier_error(res.spec, w, test);
            carry.kl_estimate = 0.0;
            res.report.kl_std_error = 0.0;
            carry.pac_bound = 1.0;
            carry.h_bound = h_bound(tr.ramp, res.privacy.epsilon, train.m, cfg.delta).value;
            carry.c_bound = c_bound(tr.ramp, res.privacy.epsilon, train.m, cfg.delta).value;
            res.report.vacuous = true;
            evaluated = true;
            return;
        }

        const bool lebesgue_side = (cfg.algorithm == Algorithm::sgld);
        std::vector<double> err_train, err_test, ramp_train, ell_train;
        const std::int64_t burn = cfg.eval_chain_steps / 10;

        // posterior samples around w under the Gaussian prior: errors, ramp
        // risks and potentials for the KL term
        GibbsTarget target = make_dataset_target(res.spec, train, cfg.l_max, w, res.le.gamma,
                                                 res.le.tau, PriorKind::gaussian,
                                                 res.le.minibatch);
        RngStream chain_rng = eval_rng.derive(1);
        sample_chain(target, cfg.eval_chain_steps, eval_sched, chain_rng,
                     [&](std::int64_t i, const WeightVector& ws) {
                         if (i <= burn || (i - burn) % cfg.eval_thin != 0) return;
                         const auto tr = detail::multi_risk(res.spec, ws, train, cfg.l_max,
                                                            cfg.ramp_slope, scratch);
                         err_train.push_back(tr.zero_one);
                         ramp_train.push_back(tr.ramp);
                         ell_train.push_back(res.le.tau * tr.bce);
                         err_test.push_back(mean_classifier_error(res.spec, ws, test));
                     });
        if (err_train.empty())
            throw std::runtime_error("bound evaluation: chain too short for burn-in/thinning");

        // i.i.d. prior draws for the partition-function term
        std::vector<double> ell_prior;
        ell_prior.reserve(static_cast<std::size_t>(cfg.eval_prior_samples));
        const double prior_sd = 1.0 / std::sqrt(res.le.tau * res.le.gamma);
        RngStream prior_rng = eval_rng.derive(2);
        WeightVector wp(w.size());
        for (std::int64_t k = 0; k < cfg.eval_prior_samples; ++k) {
            for (std::size_t j = 0; j < w.size(); ++j)
                wp[j] = w[j] + prior_sd * prior_rng.gaussian();
            ell_prior.push_back(res.le.tau *
                                empirical_risk(Loss::bounded_ce(cfg.l_max), res.spec, wp, train));
        }
        const KlEstimate kl = kl_from_potentials(ell_train, ell_prior);

        double gibbs_train_err, gibbs_test_err, ramp_mean;
        if (lebesgue_side) {
            // sgld is viewed as a sampler for the Gibbs posterior itself:
            // errors and tail bounds come from the unanchored chain
            GibbsTarget free_target = make_dataset_target(res.spec, train, cfg.l_max, w,
                                                          res.le.gamma, res.le.tau,
                                                          PriorKind::lebesgue, res.le.minibatch);
            std::vector<double> fe_train, fe_test, fr_train;
            RngStream free_rng = eval_rng.derive(3);
            sample_chain(free_target, cfg.eval_chain_steps, eval_sched, free_rng,
                         [&](std::int64_t i, const WeightVector& ws) {
                             if (i <= burn || (i - burn) % cfg.eval_thin != 0) return;
                             const auto tr = detail::multi_risk(res.spec, ws, train, cfg.l_max,
                                                                cfg.ramp_slope, scratch);
                             fe_train.push_back(tr.zero_one);
                             fr_train.push_back(tr.ramp);
                             fe_test.push_back(mean_classifier_error(res.spec, ws, test));
                         });
            gibbs_train_err = detail::ema_of(fe_train, 0.005);
            gibbs_test_err = detail::ema_of(fe_test, 0.005);
            ramp_mean = detail::mean_of(fr_train);
        } else {
            gibbs_train_err = detail::ema_of(err_train, 0.005);
            gibbs_test_err = detail::ema_of(err_test, 0.005);
            ramp_mean = detail::mean_of(ramp_train);
        }

        const auto pac = dp_pac_bayes_bound(gibbs_train_err, kl.value, train.m,
                                            res.privacy.epsilon, cfg.delta);
        const auto hb = h_bound(ramp_mean, res.privacy.epsilon, train.m, cfg.delta);
        const auto cb = c_bound(ramp_mean, res.privacy.epsilon, train.m, cfg.delta);

        carry.train_err_gibbs = gibbs_train_err;
        carry.test_err_gibbs = gibbs_test_err;
        carry.kl_estimate = kl.value;
        carry.pac_bound = pac.risk_upper;
        carry.h_bound = hb.value;
        carry.c_bound = cb.value;
        res.report.kl_std_error = kl.std_error;
        res.report.vacuous = pac.vacuous || hb.vacuous || cb.vacuous;
        evaluated = true;
    };

    RngStream train_rng(cfg.seed);
    auto tick_cb = [&](int tick, const WeightVector& w) {
        MetricsRow row = carry;
        row.tick = tick;
        row.train_err_mean = mean_classifier_error(res.spec, w, train);
        row.test_err_mean = mean_classifier_error(res.spec, w, test);
        const bool eval_now = (cfg.bound_eval_every > 0 &&
                               (tick == 1 || tick % cfg.bound_eval_every == 0 ||
                                tick == cfg.epochs)) ||
                              (cfg.bound_eval_every == 0 && tick == cfg.epochs);
        if (!evaluated && !eval_now) {
            // no evaluation yet: report the point-mass surrogate and trivial bounds
            row.train_err_gibbs = row.train_err_mean;
            row.test_err_gibbs = row.test_err_mean;
        }
        if (eval_now) {
            evaluate_bounds(tick, w);
            row.train_err_gibbs = carry.train_err_gibbs;
            row.test_err_gibbs = carry.test_err_gibbs;
            row.kl_estimate = carry.kl_estimate;
            row.pac_bound = carry.pac_bound;
            row.h_bound = carry.h_bound;
            row.c_bound = carry.c_bound;
        }
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        res.rows.push_back(row);
        if (csv.is_open()) csv << metrics_row_csv(row) << "\n" << std::flush;
    };

    TrainResult tr = run_training(cfg.algorithm, res.spec, train, res.le, cfg.epochs, cfg.l_max,
                                  train_rng, tick_cb);
    res.weights = std::move(tr.weights);

    const MetricsRow& last = res.rows.back();
    res.report.emp_err_mean = last.train_err_mean;
    res.report.emp_err_gibbs = last.train_err_gibbs;
    res.report.kl_estimate = last.kl_estimate;
    res.report.pac_bayes_bound = last.pac_bound;
    res.report.h_bound = last.h_bound;
    res.report.c_bound = last.c_bound;
    res.report.epsilon = res.privacy.epsilon;
    res.report.m = train.m;
    res.report.delta = cfg.delta;

    if (!cfg.out_dir.empty()) {
        std::ofstream js(cfg.out_dir + "/report.json");
        js << bound_report_json(res.report);
    }
    return res;
}

// One sweep cell: overrides applied on top of the base config.
struct SweepPoint {
    double tau = 0.0;
    double beta = 1.0;
    double gamma = 1.0;
    std::string labels = "true";
    std::uint64_t seed = 0;
};

struct SweepOutcome {
    SweepPoint point;
    bool ok = false;
    std::string error;
    MetricsRow final_row;
    BoundReport report;
};

inline int sweep_thread_count() {
    if (const char* env = std::getenv("ENTROPIA_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs the grid; failures are recorded per point and do not stop the sweep.
// Points run in parallel (ENTROPIA_THREADS workers) on independent streams.
inline std::vector<SweepOutcome> run_sweep(const ExperimentConfig& base,
                                           const std::vector<SweepPoint>& grid, int threads = 0) {
    std::vector<SweepOutcome> out(grid.size());
    if (grid.empty()) return out;
    if (threads <= 0) threads = sweep_thread_count();
    threads = std::min<int>(threads, static_cast<int>(grid.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            SweepOutcome& o = out[i];
            o.point = grid[i];
            ExperimentConfig cfg = base;
            cfg.out_dir.clear();
            cfg.le.tau = o.point.tau;
            cfg.le.beta = o.point.beta;
            cfg.le.gamma = o.point.gamma;
            cfg.labels = o.point.labels;
            cfg.seed = o.point.seed != 0 ? o.point.seed
                                         : splitmix64(base.seed + 0x9e37ULL * (i + 1));
            try {
                ExperimentResult r = run_experiment(cfg);
                o.final_row = r.rows.back();
                o.report = r.report;
                o.ok = true;
            } catch (const std::exception& e) {
                o.ok = false;
                o.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

inline constexpr const char* kSweepCsvHeader =
    "tau,beta,gamma,labels,seed,status,tick,train_err_mean,test_err_mean,"
    "train_err_gibbs,test_err_gibbs,pac_bound,h_bound,c_bound,kl_estimate,epsilon,"
    "wall_seconds,error";

inline std::string sweep_outcome_csv(const SweepOutcome& o) {
    using detail::g9;
    std::string s;
    s += g9(o.point.tau);
    s += ',' + g9(o.point.beta);
    s += ',' + g9(o.point.gamma);
    s += ',' + o.point.labels;
    s += ',' + std::to_string(o.point.seed);
    s += o.ok ? ",ok" : ",failed";
    const MetricsRow& r = o.final_row;
    s += ',' + std::to_string(r.tick);
    for (double v : {r.train_err_mean, r.test_err_mean, r.train_err_gibbs, r.test_err_gibbs,
                     r.pac_bound, r.h_bound, r.c_bound, r.kl_estimate, r.epsilon,
                     r.wall_seconds}) {
        s += ',';
        s += g9(v);
    }
    std::string err = o.error;
    for (char& c : err)
        if (c == ',' || c == '"' || c == '\n') c = ';';
    s += ",\"" + err + "\"";
    return s;
}

}  // namespace entropia
