#include <catch2/catch_amalgamated.hpp>

#include "entropia/entropia.hpp"
#include "test_util.hpp"

using namespace entropia;
using Catch::Approx;

TEST_CASE("network parameter count and validation") {
    NetworkSpec fc{{784, 200, 200, 1}, OutputKind::sigmoid_binary};
    CHECK(fc.param_count() == 197401);
    CHECK(fc.depth() == 3);
    fc.validate();

    NetworkSpec bad{{5}, OutputKind::sigmoid_binary};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    NetworkSpec bad2{{5, 3}, OutputKind::sigmoid_binary};  // sigmoid head must have width 1
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
    NetworkSpec bad3{{5, 1}, OutputKind::softmax_multiclass};
    CHECK_THROWS_AS(bad3.validate(), std::invalid_argument);
}

TEST_CASE("forward: softmax outputs are a stable distribution") {
    NetworkSpec spec{{2, 3, 3}, OutputKind::softmax_multiclass};
    WeightVector w(spec.param_count());
    RngStream rng(7);
    for (double& v : w) v = 50.0 * rng.gaussian();  // large logits must not overflow
    auto out = forward(spec, w, std::vector<double>{0.3, -1.2});
    double sum = 0.0;
    for (double p : out) {
        CHECK(std::isfinite(p));
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(sum == Approx(1.0).margin(1e-12));
}

TEST_CASE("forward: dimension mismatches throw with the offending sizes") {
    NetworkSpec spec{{3, 2, 1}, OutputKind::sigmoid_binary};
    WeightVector w(spec.param_count(), 0.0);
    CHECK_THROWS_WITH(forward(spec, w, std::vector<double>{1.0}),
                      Catch::Matchers::ContainsSubstring("expects 3"));
    WeightVector short_w(3, 0.0);
    CHECK_THROWS_WITH(forward(spec, short_w, std::vector<double>{1.0, 2.0, 3.0}),
                      Catch::Matchers::ContainsSubstring("3 entries"));
}

TEST_CASE("bounded cross entropy stays inside (0, l_max]") {
    NetworkSpec spec{{1, 1}, OutputKind::sigmoid_binary};
    const Loss loss = Loss::bounded_ce(4.0);

    // worst case: confident and wrong -> exactly l_max
    std::vector<double> wrong{0.0};
    CHECK(loss_from_output(loss, spec, wrong, 1) == Approx(4.0).margin(1e-12));
    // best case: confident and right -> small but strictly positive
    std::vector<double> right{1.0};
    CHECK(loss_from_output(loss, spec, right, 1) == Approx(0.018485446).margin(1e-8));
    CHECK(loss_from_output(loss, spec, right, 1) > 0.0);

    // random outputs never escape the interval
    RngStream rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p{rng.uniform()};
        for (int y : {0, 1}) {
            double v = loss_from_output(loss, spec, p, y);
            CHECK(v > 0.0);
            CHECK(v <= 4.0);
        }
    }
}

TEST_CASE("zero-one loss counts ties as errors") {
    NetworkSpec bin{{1, 1}, OutputKind::sigmoid_binary};
    const Loss l0 = Loss::zero_one();
    CHECK(loss_from_output(l0, bin, std::vector<double>{0.5}, 1) == 1.0);
    CHECK(loss_from_output(l0, bin, std::vector<double>{0.5}, 0) == 1.0);
    CHECK(loss_from_output(l0, bin, std::vector<double>{0.7}, 1) == 0.0);
    CHECK(loss_from_output(l0, bin, std::vector<double>{0.7}, 0) == 1.0);

    NetworkSpec multi{{1, 3}, OutputKind::softmax_multiclass};
    CHECK(loss_from_output(l0, multi, std::vector<double>{0.4, 0.4, 0.2}, 0) == 1.0);
    CHECK(loss_from_output(l0, multi, std::vector<double>{0.5, 0.3, 0.2}, 0) == 0.0);
    CHECK(loss_from_output(l0, multi, std::vector<double>{0.5, 0.3, 0.2}, 2) == 1.0);
}

TEST_CASE("ramp loss interpolates between the margin thresholds") {
    NetworkSpec bin{{1, 1}, OutputKind::sigmoid_binary};
    const Loss ramp2 = Loss::ramp(2.0);
    // margin t = (2y-1)(2p-1); p=0.55, y=1 -> t=0.1 -> 1 - 2*0.1
    CHECK(loss_from_output(ramp2, bin, std::vector<double>{0.55}, 1) == Approx(0.8).margin(1e-12));
    // beyond 1/slope the loss is exactly zero
    CHECK(loss_from_output(ramp2, bin, std::vector<double>{0.9}, 1) == 0.0);
    // wrong side: exactly one
    CHECK(loss_from_output(ramp2, bin, std::vector<double>{0.3}, 1) == 1.0);
    CHECK(loss_from_output(ramp2, bin, std::vector<double>{0.5}, 1) == 1.0);  // tie

    NetworkSpec multi{{1, 3}, OutputKind::softmax_multiclass};
    CHECK(loss_from_output(ramp2, multi, std::vector<double>{0.5, 0.3, 0.2}, 0) ==
          Approx(0.6).margin(1e-12));

    // ramp dominates zero-one everywhere
    const Loss l0 = Loss::zero_one();
    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p{rng.uniform()};
        for (int y : {0, 1}) {
            CHECK(loss_from_output(ramp2, bin, p, y) >= loss_from_output(l0, bin, p, y) - 1e-12);
        }
    }
}

TEST_CASE("analytic gradient at a zero-weight sigmoid unit") {
    // p = 1/2, so d(loss)/d(bias) = -(1 - 2 e^-4) * p(1-p) / psi = -0.4816843611112658
    NetworkSpec spec{{1, 1}, OutputKind::sigmoid_binary};
    LabeledDataset ds;
    ds.m = 1;
    ds.d = 1;
    ds.x = {0.0};
    ds.y = {1};
    WeightVector w(2, 0.0);
    auto g = grad_empirical_risk(spec, w, ds, 4.0);
    CHECK(g[1] == Approx(-0.4816843611112658).margin(1e-12));
    CHECK(g[0] == Approx(0.0).margin(1e-15));  // input is zero

    ds.y = {0};
    auto g0 = grad_empirical_risk(spec, w, ds, 4.0);
    CHECK(g0[1] == Approx(0.4816843611112658).margin(1e-12));
}

TEST_CASE("backprop matches central finite differences") {
    RngStream rng(42);

    SECTION("sigmoid head") {
        NetworkSpec spec{{6, 10, 1}, OutputKind::sigmoid_binary};
        auto ds = testutil::make_random_dataset(12, 6, 2, 5);
        auto w = init_weights(spec, rng);
        auto g = grad_empirical_risk(spec, w, ds, 4.0);
        auto fd = testutil::fd_risk_gradient(spec, w, ds, 4.0, 1e-6);
        CHECK(testutil::l2_relative_error(g, fd) < 5e-6);
    }
    SECTION("softmax head") {
        NetworkSpec spec{{5, 8, 3}, OutputKind::softmax_multiclass};
        auto ds = testutil::make_random_dataset(12, 5, 3, 6);
        auto w = init_weights(spec, rng);
        auto g = grad_empirical_risk(spec, w, ds, 4.0);
        auto fd = testutil::fd_risk_gradient(spec, w, ds, 4.0, 1e-6);
        CHECK(testutil::l2_relative_error(g, fd) < 5e-6);
    }
    SECTION("two hidden layers") {
        NetworkSpec spec{{4, 7, 5, 1}, OutputKind::sigmoid_binary};
        auto ds = testutil::make_random_dataset(10, 4, 2, 7);
        auto w = init_weights(spec, rng);
        auto g = grad_empirical_risk(spec, w, ds, 4.0);
        auto fd = testutil::fd_risk_gradient(spec, w, ds, 4.0, 1e-6);
        CHECK(testutil::l2_relative_error(g, fd) < 5e-6);
    }
}

TEST_CASE("empirical risk over an index subset matches the manual average") {
    NetworkSpec spec{{3, 4, 1}, OutputKind::sigmoid_binary};
    auto ds = testutil::make_random_dataset(20, 3, 2, 9);
    RngStream rng(1);
    auto w = init_weights(spec, rng);
    const Loss loss = Loss::bounded_ce(4.0);
    std::vector<int> idx{3, 7, 11};
    double manual = 0.0;
    for (int i : idx) manual += example_loss(loss, spec, w, ds.example(i), ds.y[i]);
    manual /= idx.size();
    CHECK(empirical_risk(loss, spec, w, ds, idx) == Approx(manual).margin(1e-15));

    LabeledDataset empty;
    empty.m = 0;
    empty.d = 3;
    CHECK_THROWS_AS(empirical_risk(loss, spec, w, empty), std::invalid_argument);
}

TEST_CASE("weight init: gaussian fan-in scaling, zero biases") {
    NetworkSpec spec{{100, 50, 1}, OutputKind::sigmoid_binary};
    RngStream rng(123);
    auto w = init_weights(spec, rng);

    // first layer weights ~ N(0, 2/100)
    double mean = 0.0, var = 0.0;
    const int n = 100 * 50;
    for (int i = 0; i < n; ++i) mean += w[i];
    mean /= n;
    for (int i = 0; i < n; ++i) var += (w[i] - mean) * (w[i] - mean);
    var /= n - 1;
    CHECK(std::fabs(mean) < 0.005);
    CHECK(var == Approx(0.02).epsilon(0.10));

    // biases of both layers are exactly zero
    for (int j = 0; j < 50; ++j) CHECK(w[n + j] == 0.0);
    CHECK(w[spec.param_count() - 1] == 0.0);
}

TEST_CASE("label range checks") {
    NetworkSpec spec{{2, 1}, OutputKind::sigmoid_binary};
    WeightVector w(spec.param_count(), 0.0);
    std::vector<double> out{0.7};
    CHECK_THROWS_AS(loss_from_output(Loss::zero_one(), spec, out, 2), std::invalid_argument);
    NetworkSpec multi{{2, 3}, OutputKind::softmax_multiclass};
    std::vector<double> mout{0.2, 0.3, 0.5};
    CHECK_THROWS_AS(loss_from_output(Loss::zero_one(), multi, mout, 3), std::invalid_argument);
}
