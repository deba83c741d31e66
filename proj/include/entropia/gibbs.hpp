#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropia/nn.hpp"
#include "entropia/optim.hpp"
#include "entropia/rng.hpp"
#include "entropia/schedule.hpp"

namespace entropia {

enum class PriorKind { gaussian, lebesgue };

// Sampling target proportional to exp(-tau * risk(w')) times either a
// Gaussian prior N(center, (tau*gamma)^-1 I) or Lebesgue measure. risk_grad
// may be a stochastic (minibatch) estimate; it must be unbiased.
struct GibbsTarget {
    WeightVector center;
    double gamma = 1.0;
    double tau = 1.0;
    PriorKind prior_kind = PriorKind::gaussian;
    std::function<double(const WeightVector&)> risk;
    std::function<void(const WeightVector&, WeightVector&, RngStream&)> risk_grad;

    void validate() const {
        if (center.empty()) throw std::invalid_argument("GibbsTarget: empty center");
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw std::invalid_argument("GibbsTarget: tau must be positive and finite");
        if (prior_kind == PriorKind::gaussian && (!(gamma > 0.0) || !std::isfinite(gamma)))
            throw std::invalid_argument("GibbsTarget: gamma must be positive and finite");
        if (!risk_grad) throw std::invalid_argument("GibbsTarget: risk_grad not set");
    }
};

// Gibbs target whose risk is the bounded cross entropy of a network on a
// dataset. minibatch = 0 uses full-batch gradients, otherwise epoch-shuffled
// minibatches of that size.
inline GibbsTarget make_dataset_target(const NetworkSpec& spec, const LabeledDataset& data,
                                       double l_max, WeightVector center, double gamma,
                                       double tau, PriorKind prior_kind = PriorKind::gaussian,
                                       int minibatch = 0) {
    spec.validate();
    data.validate();
    struct State {
        NetworkSpec spec;
        const LabeledDataset* data;
        double l_max;
        detail::Scratch scratch;
        std::unique_ptr<MinibatchSampler> sampler;
        int minibatch;
    };
    auto st = std::make_shared<State>();
    st->spec = spec;
    st->data = &data;
    st->l_max = l_max;
    st->minibatch = std::min(minibatch, data.m);  // oversized requests mean full batch
    if (st->minibatch > 0) st->sampler = std::make_unique<MinibatchSampler>(data.m);

    GibbsTarget t;
    t.center = std::move(center);
    t.gamma = gamma;
    t.tau = tau;
    t.prior_kind = prior_kind;
    t.risk = [st](const WeightVector& w) {
        return empirical_risk(Loss::bounded_ce(st->l_max), st->spec, w, *st->data);
    };
    t.risk_grad = [st](const WeightVector& w, WeightVector& g, RngStream& rng) {
        if (st->minibatch > 0) {
            auto batch = st->sampler->next(st->minibatch, rng);
            grad_empirical_risk_into(st->spec, w, *st->data, st->l_max, batch, g, st->scratch);
        } else {
            grad_empirical_risk_into(st->spec, w, *st->data, st->l_max, {}, g, st->scratch);
        }
    };
    return t;
}

// One-dimensional target from plain callables, for oracles and tests.
inline GibbsTarget make_scalar_target(std::function<double(double)> risk,
                                      std::function<double(double)> drisk, double center,
                                      double gamma, double tau,
                                      PriorKind prior_kind = PriorKind::gaussian) {
    GibbsTarget t;
    t.center = {center};
    t.gamma = gamma;
    t.tau = tau;
    t.prior_kind = prior_kind;
    t.risk = [risk](const WeightVector& w) { return risk(w[0]); };
    t.risk_grad = [drisk](const WeightVector& w, WeightVector& g, RngStream&) {
        g.assign(1, drisk(w[0]));
    };
    return t;
}

// SGLD chain on the target potential. Step i uses eta_i = sched.step(i),
// drift -tau*grad_risk - tau*gamma*(w' - center) (the prior pull is dropped
// for Lebesgue), and noise sqrt(eta_i) per coordinate. The visitor sees every
// post-update state: visit(i, w') with i starting at 1.
template <typename Visitor>
void sample_chain(const GibbsTarget& target, std::int64_t n_steps, const ScheduleSpec& sched,
                  RngStream& rng, Visitor&& visit, const WeightVector* init = nullptr) {
    target.validate();
    sched.validate();
    if (n_steps < 1) throw std::invalid_argument("sample_chain: need n_steps >= 1");
    WeightVector w = init ? *init : target.center;
    if (w.size() != target.center.size())
        throw std::invalid_argument("sample_chain: init size does not match center");
    WeightVector grad(w.size(), 0.0);
    const bool pull = target.prior_kind == PriorKind::gaussian;
    for (std::int64_t i = 1; i <= n_steps; ++i) {
        const double eta = sched.step(i);
        target.risk_grad(w, grad, rng);
        const double half = 0.5 * eta;
        const double noise = std::sqrt(eta);
        for (std::size_t j = 0; j < w.size(); ++j) {
            double drift = -target.tau * grad[j];
            if (pull) drift -= target.tau * target.gamma * (w[j] - target.center[j]);
            w[j] += half * drift + noise * rng.gaussian();
            if (!std::isfinite(w[j]) || std::fabs(w[j]) > kDivergenceLimit)
                throw std::runtime_error("sample_chain: coordinate " + std::to_string(j) +
                                         " diverged at step " + std::to_string(i) + " (value " +
                                         std::to_string(w[j]) + ", limit 1e8)");
        }
        visit(i, const_cast<const WeightVector&>(w));
    }
}

inline std::vector<double> collect_chain_1d(const GibbsTarget& target, std::int64_t n_steps,
                                            const ScheduleSpec& sched, RngStream& rng) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_steps));
    sample_chain(target, n_steps, sched, rng,
                 [&](std::int64_t, const WeightVector& w) { out.push_back(w[0]); });
    return out;
}

namespace detail {

// standard error of the mean of a correlated sequence via batch means
inline double batch_means_stderr(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 4) return 0.0;
    std::size_t nb = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    nb = std::min<std::size_t>(std::max<std::size_t>(nb, 2), 64);
    const std::size_t len = n / nb;
    double grand = 0.0;
    std::vector<double> means(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += v[i];
        means[b] = s / static_cast<double>(len);
        grand += means[b];
    }
    grand /= static_cast<double>(nb);
    double ss = 0.0;
    for (double mbar : means) ss += (mbar - grand) * (mbar - grand);
    return std::sqrt(ss / (static_cast<double>(nb) * (nb - 1)));
}

}  // namespace detail

// Chain-based scalar estimate: `value` is a running exponential average with
// weight `running_average_weight` over post-burn-in samples, `mean` the plain
// average, `std_error` a batch-means standard error of the mean.
struct ChainEstimate {
    double value = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    double running_average_weight = 0.005;
};

inline ChainEstimate chain_estimate_from_values(const std::vector<double>& values,
                                                double ema_alpha) {
    ChainEstimate est;
    est.running_average_weight = ema_alpha;
    est.n_samples = static_cast<std::int64_t>(values.size());
    if (values.empty()) throw std::invalid_argument("chain_estimate: no samples");
    double ema = values[0];
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) ema = (1.0 - ema_alpha) * ema + ema_alpha * values[i];
        sum += values[i];
    }
    est.value = ema;
    est.mean = sum / static_cast<double>(values.size());
    est.std_error = detail::batch_means_stderr(values);
    return est;
}

// 0-1 error of the Gibbs classifier: runs the chain for n_samples steps,
// discards the first 10% as burn-in, and averages the sampled networks'
// zero-one error on `data`.
inline ChainEstimate gibbs_error(const GibbsTarget& target, const NetworkSpec& spec,
                                 const LabeledDataset& data, std::int64_t n_samples,
                                 const ScheduleSpec& sched, RngStream& rng,
                                 double ema_alpha = 0.005) {
    if (n_samples < 1) throw std::invalid_argument("gibbs_error: need n_samples >= 1");
    const std::int64_t burn = n_samples / 10;
    std::vector<double> errs;
    errs.reserve(static_cast<std::size_t>(n_samples - burn));
    sample_chain(target, n_samples, sched, rng, [&](std::int64_t i, const WeightVector& w) {
        if (i > burn) errs.push_back(empirical_risk(Loss::zero_one(), spec, w, data));
    });
    return chain_estimate_from_values(errs, ema_alpha);
}

// Plain 0-1 error of a single weight vector.
inline double mean_classifier_error(const NetworkSpec& spec, const WeightVector& w,
                                    const LabeledDataset& data) {
    return empirical_risk(Loss::zero_one(), spec, w, data);
}

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth, double& unresolved) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = (left + right - whole) / 15.0;
    if (std::fabs(err) <= tol) return left + right + err;
    if (depth <= 0) {
        unresolved += std::fabs(err);
        return left + right + err;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, unresolved) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, unresolved);
}

// Adaptive Simpson with an absolute tolerance; throws if refinement bottoms
// out before reaching it.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double unresolved = 0.0;
    double v = adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, unresolved);
    if (unresolved > tol)
        throw std::runtime_error("adaptive_simpson: did not converge, achieved tolerance " +
                                 std::to_string(unresolved) + " vs requested " +
                                 std::to_string(tol));
    return v;
}

// Fixed subdivision before the adaptive pass: a single Simpson start samples
// only three points, so a peak much narrower than the window can sit between
// them and the recursion accepts ~0 without ever seeing it.
inline double composite_adaptive_simpson(const std::function<double(double)>& f, double a,
                                         double b, int panels, double tol) {
    double total = 0.0;
    const double per_panel = tol / panels;
    for (int k = 0; k < panels; ++k) {
        const double x0 = a + (b - a) * static_cast<double>(k) / panels;
        const double x1 = a + (b - a) * static_cast<double>(k + 1) / panels;
        total += adaptive_simpson(f, x0, x1, per_panel);
    }
    return total;
}

}  // namespace detail

// Quadrature oracle for the one-dimensional local free energy
//   F(c) = log Int exp(-tau*risk(x) - tau*gamma/2 (x-c)^2) dx.
// Integrates over a 12-sigma window around the center, sigma = (tau*gamma)^-1/2.
// dF_dw integrates the centered first moment; gibbs_mean integrates the raw
// first moment. The two are separate quadratures of the identity
// dF/dc = tau*gamma*(E[x] - c), so their agreement checks the numerics.
struct LocalEntropy1d {
    double log_partition = 0.0;  // F
    double dF_dw = 0.0;
    double gibbs_mean = 0.0;
};

inline LocalEntropy1d local_entropy_quadrature_1d(const std::function<double(double)>& risk,
                                                  double center, double gamma, double tau,
                                                  double rel_tol = 1e-12) {
    if (!(tau > 0.0) || !(gamma > 0.0) || !std::isfinite(tau) || !std::isfinite(gamma))
        throw std::invalid_argument("local_entropy_quadrature_1d: need finite positive tau, gamma");
    const double sigma = 1.0 / std::sqrt(tau * gamma);
    const double lo = center - 12.0 * sigma;
    const double hi = center + 12.0 * sigma;

    auto phi = [&](double x) {
        const double dx = x - center;
        return -tau * risk(x) - 0.5 * tau * gamma * dx * dx;
    };
    // locate the exponent peak on a coarse grid so the integrand is O(1)
    const int n_scan = 2000;
    double phi_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n_scan; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / n_scan;
        phi_max = std::max(phi_max, phi(x));
    }
    if (!std::isfinite(phi_max))
        throw std::runtime_error("local_entropy_quadrature_1d: potential not finite in window");

    auto f0 = [&](double x) { return std::exp(phi(x) - phi_max); };
    auto f1c = [&](double x) { return (x - center) * std::exp(phi(x) - phi_max); };
    auto f1 = [&](double x) { return x * std::exp(phi(x) - phi_max); };

    // the window is 24 sigma wide; sigma/2 panels keep any posterior spike in view
    const int panels = 48;
    const double tol0 = rel_tol * (hi - lo);  // integrand is <= 1 after normalising
    const double i0 = detail::composite_adaptive_simpson(f0, lo, hi, panels, tol0);
    if (!(i0 > 0.0))
        throw std::runtime_error("local_entropy_quadrature_1d: zero mass in window");
    const double m1c = detail::composite_adaptive_simpson(f1c, lo, hi, panels, tol0 * sigma);
    const double m1 = detail::composite_adaptive_simpson(
        f1, lo, hi, panels, tol0 * std::max(1.0, std::fabs(center) + sigma));

    LocalEntropy1d out;
    out.log_partition = phi_max + std::log(i0);
    out.dF_dw = tau * gamma * (m1c / i0);
    out.gibbs_mean = m1 / i0;
    return out;
}

}  // namespace entropia
