#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "entropia/entropia.hpp"
#include "test_util.hpp"

using namespace entropia;
using Catch::Approx;

namespace {

std::string tmp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(p);
    return p.string();
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// the wall_seconds column is the only nondeterministic field; cut it
std::string drop_last_column(const std::string& csv) {
    std::stringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        const auto pos = line.rfind(',');
        out += line.substr(0, pos);
        out += '\n';
    }
    return out;
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::entropy_sgld;
    cfg.data = "synthetic";
    cfg.synth_m = 200;
    cfg.synth_d = 4;
    cfg.separation = 6.0;
    cfg.hidden = {4};
    cfg.le.tau = 0.0;  // sqrt(200)
    cfg.le.inner_steps = 4;
    cfg.le.minibatch = 20;
    cfg.le.base_rate = 0.05;
    cfg.epochs = 3;
    cfg.bound_eval_every = 2;
    cfg.eval_chain_steps = 150;
    cfg.eval_thin = 2;
    cfg.eval_prior_samples = 50;
    cfg.seed = 31;
    return cfg;
}

}  // namespace

TEST_CASE("config file parsing: keys, comments, overrides") {
    const std::string path = tmp_dir("entropia_cfg") + "/exp.cfg";
    {
        std::ofstream f(path);
        f << "# a comment line\n"
          << "algorithm = entropy_sgd\n"
          << "data = synthetic\n"
          << "synth_m = 500   # trailing comment\n"
          << "hidden = 8,4\n"
          << "tau = inf\n"
          << "gamma = 0.7\n"
          << "alpha = 0.5\n"
          << "labels = random\n"
          << "seed = 99\n"
          << "\n"
          << "epochs = 7\n";
    }
    auto cfg = parse_config_file(path);
    CHECK(cfg.algorithm == Algorithm::entropy_sgd);
    CHECK(cfg.synth_m == 500);
    CHECK(cfg.hidden == std::vector<int>{8, 4});
    CHECK(std::isinf(cfg.le.tau));
    CHECK(cfg.le.gamma == 0.7);
    CHECK(cfg.le.alpha == 0.5);
    CHECK(cfg.labels == "random");
    CHECK(cfg.seed == 99);
    CHECK(cfg.epochs == 7);

    // explicit overrides win over the file
    apply_config_entry(cfg, "epochs", "9");
    apply_config_entry(cfg, "tau", "12.5");
    CHECK(cfg.epochs == 9);
    CHECK(cfg.le.tau == 12.5);

    CHECK_THROWS_WITH(apply_config_entry(cfg, "learning_rate", "1"),
                      Catch::Matchers::ContainsSubstring("unknown key 'learning_rate'"));
    CHECK_THROWS_WITH(apply_config_entry(cfg, "epochs", "seven"),
                      Catch::Matchers::ContainsSubstring("bad number"));
    CHECK_THROWS_AS(apply_config_entry(cfg, "epochs", "2.5"), std::invalid_argument);

    {
        std::ofstream f(path);
        f << "just words\n";
    }
    CHECK_THROWS_WITH(parse_config_file(path), Catch::Matchers::ContainsSubstring("line 1"));
    CHECK_THROWS_AS(parse_config_file("/no/such/file.cfg"), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-domain values") {
    ExperimentConfig cfg = small_config();
    cfg.validate();
    ExperimentConfig c = cfg;
    c.labels = "half";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = cfg;
    c.data = "mnist";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = cfg;
    c.delta = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = cfg;
    c.hidden = {};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = cfg;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("metrics csv formatting") {
    CHECK(std::string(kMetricsCsvHeader) ==
          "tick,train_err_mean,test_err_mean,train_err_gibbs,test_err_gibbs,"
          "pac_bound,h_bound,c_bound,kl_estimate,epsilon,wall_seconds");

    MetricsRow r;
    r.tick = 3;
    r.train_err_mean = 0.125;
    r.test_err_mean = 1.0 / 3.0;
    r.train_err_gibbs = 0.5;
    r.test_err_gibbs = 0.25;
    r.pac_bound = 1.0;
    r.h_bound = 0.0065;
    r.c_bound = 0.25;
    r.kl_estimate = 12.75;
    r.epsilon = std::numeric_limits<double>::infinity();
    r.wall_seconds = 2.0;
    CHECK(metrics_row_csv(r) == "3,0.125,0.333333333,0.5,0.25,1,0.0065,0.25,12.75,inf,2");
}

TEST_CASE("bound report serialization") {
    BoundReport r;
    r.emp_err_gibbs = 0.03125;
    r.epsilon = std::numeric_limits<double>::infinity();
    r.vacuous = true;
    const std::string js = bound_report_json(r);
    CHECK(js.find("\"schema_version\": 1") != std::string::npos);
    CHECK(js.find("\"emp_err_gibbs\": 0.03125") != std::string::npos);
    CHECK(js.find("\"epsilon\": \"infinity\"") != std::string::npos);
    CHECK(js.find("\"vacuous\": true") != std::string::npos);
    CHECK(js.find("\"optimistic\": true") != std::string::npos);
}

TEST_CASE("experiment runs are reproducible except for wall time") {
    ExperimentConfig cfg = small_config();
    cfg.out_dir = tmp_dir("entropia_run_a");
    auto r1 = run_experiment(cfg);
    cfg.out_dir = tmp_dir("entropia_run_b");
    auto r2 = run_experiment(cfg);

    const std::string csv1 = drop_last_column(read_file(tmp_dir("entropia_run_a") + "/metrics.csv"));
    const std::string csv2 = drop_last_column(read_file(tmp_dir("entropia_run_b") + "/metrics.csv"));
    CHECK(csv1 == csv2);
    CHECK(read_file(tmp_dir("entropia_run_a") + "/report.json") ==
          read_file(tmp_dir("entropia_run_b") + "/report.json"));
    CHECK(r1.weights == r2.weights);

    // a different seed changes the trajectory
    cfg.seed = 32;
    cfg.out_dir.clear();
    auto r3 = run_experiment(cfg);
    CHECK(r3.weights != r1.weights);
}

TEST_CASE("experiment rows: cadence, ranges, carry-forward") {
    ExperimentConfig cfg = small_config();
    auto res = run_experiment(cfg);

    REQUIRE(res.rows.size() == 3);
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const MetricsRow& row = res.rows[i];
        CHECK(row.tick == static_cast<int>(i) + 1);
        for (double v : {row.train_err_mean, row.test_err_mean, row.train_err_gibbs,
                         row.test_err_gibbs, row.pac_bound, row.h_bound, row.c_bound}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(row.kl_estimate >= 0.0);
        CHECK(row.epsilon == Approx(8.0 / std::sqrt(200.0)).margin(1e-12));
    }
    CHECK(res.le.tau == Approx(std::sqrt(200.0)).margin(1e-12));
    CHECK(res.report.m == 200.0);
    CHECK(res.report.pac_bayes_bound == res.rows.back().pac_bound);

    // with bound_eval_every = 0 only the last tick is evaluated; earlier rows
    // carry the point-mass surrogate and trivial bounds
    cfg.bound_eval_every = 0;
    auto lazy = run_experiment(cfg);
    for (std::size_t i = 0; i + 1 < lazy.rows.size(); ++i) {
        CHECK(lazy.rows[i].pac_bound == 1.0);
        CHECK(lazy.rows[i].kl_estimate == 0.0);
        CHECK(lazy.rows[i].train_err_gibbs == lazy.rows[i].train_err_mean);
    }
    CHECK(lazy.rows.back().kl_estimate > 0.0);
}

TEST_CASE("per-algorithm privacy accounting") {
    ExperimentConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.bound_eval_every = 0;

    SECTION("plain sgd discloses nothing: infinite budget, vacuous bounds") {
        cfg.algorithm = Algorithm::sgd;
        cfg.le.tau = std::numeric_limits<double>::infinity();
        auto res = run_experiment(cfg);
        CHECK(std::isinf(res.report.epsilon));
        CHECK(res.report.vacuous);
        CHECK(res.report.pac_bayes_bound == 1.0);
        CHECK(res.report.h_bound == 1.0);
        const std::string js = bound_report_json(res.report);
        CHECK(js.find("\"epsilon\": \"infinity\"") != std::string::npos);
    }
    SECTION("sgld at finite temperature uses the posterior-sampler budget") {
        cfg.algorithm = Algorithm::sgld;
        cfg.le.tau = 10.0;
        auto res = run_experiment(cfg);
        CHECK(res.report.epsilon == Approx(2.0 * 10.0 * 4.0 / 200.0).margin(1e-12));
    }
    SECTION("local-entropy algorithms use the landscape budget") {
        cfg.algorithm = Algorithm::entropy_sgd;
        cfg.le.tau = 10.0;
        cfg.le.beta = 2.0;
        auto res = run_experiment(cfg);
        CHECK(res.report.epsilon == Approx(2.0 * 2.0 * 4.0 * 10.0 / 200.0).margin(1e-12));
    }
}

TEST_CASE("sweep: grid execution, failure isolation, determinism") {
    ExperimentConfig base = small_config();
    base.epochs = 2;
    base.bound_eval_every = 0;
    base.eval_chain_steps = 100;

    std::vector<SweepPoint> grid;
    for (double tau : {8.0, 20.0}) {
        SweepPoint p;
        p.tau = tau;
        grid.push_back(p);
    }
    SweepPoint bad;
    bad.tau = 10.0;
    bad.gamma = -1.0;  // invalid: the point must fail, the sweep must not
    grid.push_back(bad);

    auto out1 = run_sweep(base, grid, 2);
    auto out2 = run_sweep(base, grid, 1);  // thread count must not matter
    REQUIRE(out1.size() == 3);
    CHECK(out1[0].ok);
    CHECK(out1[1].ok);
    CHECK_FALSE(out1[2].ok);
    CHECK(out1[2].error.find("gamma") != std::string::npos);

    for (int i = 0; i < 2; ++i) {
        CHECK(out1[i].final_row.pac_bound == out2[i].final_row.pac_bound);
        CHECK(out1[i].final_row.train_err_mean == out2[i].final_row.train_err_mean);
        CHECK(out1[i].final_row.kl_estimate == out2[i].final_row.kl_estimate);
    }

    // tidy CSV: header plus one line per point, failures marked
    const std::string row_ok = sweep_outcome_csv(out1[0]);
    CHECK(row_ok.find(",ok,") != std::string::npos);
    const std::string row_bad = sweep_outcome_csv(out1[2]);
    CHECK(row_bad.find(",failed,") != std::string::npos);
    CHECK(std::string(kSweepCsvHeader).find("tau,beta,gamma,labels,seed,status") == 0);
}

TEST_CASE("training on the easy mixture actually separates it") {
    ExperimentConfig cfg = small_config();
    cfg.synth_m = 400;
    cfg.epochs = 40;
    cfg.le.base_rate = 0.5;
    cfg.le.minibatch = 32;
    cfg.bound_eval_every = 0;
    auto res = run_experiment(cfg);
    CHECK(res.rows.back().train_err_mean < 0.2);
    CHECK(res.rows.back().test_err_mean < 0.25);
}
