#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropia/gibbs.hpp"

namespace entropia {

// kl(q || p) between Bernoulli(q) and Bernoulli(p); p must be interior.
inline double kl_bernoulli(double q, double p) {
    if (!(q >= 0.0) || !(q <= 1.0)) throw std::invalid_argument("kl_bernoulli: q outside [0,1]");
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("kl_bernoulli: p outside (0,1)");
    double v = 0.0;
    if (q > 0.0) v += q * std::log(q / p);
    if (q < 1.0) v += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
    return v;
}

namespace detail {

inline constexpr double kKlClamp = 1.0 - 1e-12;

// largest p in [q, clamp] with kl(q||p) <= c: bisection brackets to 1e-6,
// Newton accelerates, and a final bracketed bisection lands the feasible
// endpoint within |kl(q||p) - c| <= 1e-12, or as close as adjacent doubles
// allow for roots hard against p = 1.
inline double kl_inverse_up(double q, double c) {
    if (c == 0.0) return q;
    double lo = q;  // invariant: g(lo) <= 0 (feasible side)
    double hi = kKlClamp;
    if (q >= hi) return hi;
    auto g = [&](double p) { return kl_bernoulli(q, p) - c; };
    if (g(hi) <= 0.0) return hi;  // budget exceeds the whole range: clamp
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) <= 0.0) lo = mid; else hi = mid;
    }
    double p = 0.5 * (lo + hi);
    for (int it = 0; it < 20; ++it) {
        const double gp = g(p);
        if (gp <= 0.0) lo = std::max(lo, p); else hi = std::min(hi, p);
        if (std::fabs(gp) < 1e-12) break;
        const double slope = (p - q) / (p * (1.0 - p));  // d/dp kl(q||p)
        double next = (slope > 0.0) ? p - gp / slope : 0.5 * (lo + hi);
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        p = next;
    }
    // kl(q||q) = 0, and p = q may sit on the domain edge (q = 0), so never
    // evaluate g there
    double glo = (lo > q) ? g(lo) : -c;
    for (int it = 0; it < 200 && std::fabs(glo) > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // interval down to adjacent doubles
        const double gm = g(mid);
        if (gm <= 0.0) { lo = mid; glo = gm; } else hi = mid;
    }
    return lo;
}

// smallest p in [floor, q] with kl(q||p) <= c, to the same tolerance
inline double kl_inverse_down(double q, double c) {
    if (c == 0.0) return q;
    if (q <= 0.0) return 0.0;
    double lo = 1e-15;
    double hi = std::min(q, kKlClamp);  // invariant: g(hi) <= 0
    auto g = [&](double p) { return kl_bernoulli(q, p) - c; };
    if (g(lo) <= 0.0) return 0.0;  // budget covers everything below q
    double ghi = (hi < q) ? g(hi) : -c;  // kl(q||q) = 0
    for (int it = 0; it < 200 && std::fabs(ghi) > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double gm = g(mid);
        if (gm <= 0.0) { hi = mid; ghi = gm; } else lo = mid;
    }
    return hi;
}

}  // namespace detail

// Upper inversion of the binary kl: sup{p >= q : kl(q||p) <= c}, clamped at
// 1 - 1e-12. Monotone in both arguments; kl_inverse_upper(q, 0) = q.
inline double kl_inverse_upper(double q, double c) {
    if (!(q >= 0.0) || !(q <= 1.0)) throw std::invalid_argument("kl_inverse_upper: q outside [0,1]");
    if (!(c >= 0.0)) throw std::invalid_argument("kl_inverse_upper: budget must be >= 0");
    return detail::kl_inverse_up(std::min(q, detail::kKlClamp), c);
}

// Lower inversion: inf{p <= q : kl(q||p) <= c}.
inline double kl_inverse_lower(double q, double c) {
    if (!(q >= 0.0) || !(q <= 1.0)) throw std::invalid_argument("kl_inverse_lower: q outside [0,1]");
    if (!(c >= 0.0)) throw std::invalid_argument("kl_inverse_lower: budget must be >= 0");
    return detail::kl_inverse_down(q, c);
}

// Linear PAC-Bayes risk bound:
//   (1 - 1/(2 lambda))^-1 (emp + lambda*l_max/m (kl + log(1/delta))), lambda > 1/2.
inline double linear_pac_bayes(double emp_risk, double kl, double m, double lambda, double delta,
                               double l_max) {
    if (!(lambda > 0.5)) throw std::invalid_argument("linear_pac_bayes: need lambda > 1/2");
    if (!(m > 0.0)) throw std::invalid_argument("linear_pac_bayes: need m > 0");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("linear_pac_bayes: need delta in (0,1)");
    if (!(emp_risk >= 0.0) || !(kl >= 0.0) || !(l_max > 0.0))
        throw std::invalid_argument("linear_pac_bayes: negative inputs");
    const double front = 1.0 / (1.0 - 0.5 / lambda);
    return front * (emp_risk + lambda * l_max / m * (kl + std::log(1.0 / delta)));
}

// (epsilon, delta) privacy budget along with the inputs that derived it.
struct PrivacyBudget {
    double epsilon = 0.0;
    double delta = 0.05;
    double beta = 0.0;        // mechanism exponent
    double tau = 0.0;
    double l_max = 0.0;
    double m = 0.0;
    double sensitivity = 0.0;  // per-example swap sensitivity of the score
};

// Differential privacy of a sample from the local-entropy exponential
// mechanism: score sensitivity l_max*tau/m, so epsilon = 2*beta*l_max*tau/m.
inline PrivacyBudget epsilon_local_entropy(double beta, double tau, double l_max, double m,
                                           double delta = 0.05) {
    if (!(beta >= 0.0) || !(tau >= 0.0) || !(l_max > 0.0) || !(m > 0.0))
        throw std::invalid_argument("epsilon_local_entropy: bad inputs");
    PrivacyBudget b;
    b.beta = beta;
    b.tau = tau;
    b.l_max = l_max;
    b.m = m;
    b.delta = delta;
    b.sensitivity = l_max * tau / m;
    b.epsilon = 2.0 * beta * b.sensitivity;
    return b;
}

// Privacy of a sample from the Gibbs posterior exp(-tau * emp_risk): the
// mechanism exponent is tau itself and the risk sensitivity is l_max/m.
inline PrivacyBudget epsilon_gibbs_posterior(double tau, double l_max, double m,
                                             double delta = 0.05) {
    if (!(tau >= 0.0) || !(l_max > 0.0) || !(m > 0.0))
        throw std::invalid_argument("epsilon_gibbs_posterior: bad inputs");
    PrivacyBudget b;
    b.beta = tau;
    b.tau = tau;
    b.l_max = l_max;
    b.m = m;
    b.delta = delta;
    b.sensitivity = l_max / m;
    b.epsilon = 2.0 * tau * b.sensitivity;
    return b;
}

// Two-sided risk interval from the differentially private PAC-Bayes bound:
//   kl(emp || risk) <= (kl_q_p + ln(2 sqrt m) + 2 max{ln(3/delta), m eps^2}) / m.
struct DpPacBayes {
    double kl_budget = 0.0;
    double risk_upper = 1.0;
    double risk_lower = 0.0;
    bool vacuous = false;
};

inline DpPacBayes dp_pac_bayes_bound(double emp_err, double kl_q_p, double m, double epsilon,
                                     double delta) {
    if (!(emp_err >= 0.0) || !(emp_err <= 1.0))
        throw std::invalid_argument("dp_pac_bayes_bound: emp_err outside [0,1]");
    if (!(m > 0.0)) throw std::invalid_argument("dp_pac_bayes_bound: need m > 0");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("dp_pac_bayes_bound: need delta in (0,1)");
    if (!(kl_q_p >= 0.0)) throw std::invalid_argument("dp_pac_bayes_bound: need kl >= 0");
    DpPacBayes r;
    if (std::isinf(epsilon)) {  // no privacy: nothing to invert
        r.kl_budget = std::numeric_limits<double>::infinity();
        r.risk_upper = 1.0;
        r.risk_lower = 0.0;
        r.vacuous = true;
        return r;
    }
    if (!(epsilon >= 0.0)) throw std::invalid_argument("dp_pac_bayes_bound: need epsilon >= 0");
    const double dp_term = 2.0 * std::max(std::log(3.0 / delta), m * epsilon * epsilon);
    r.kl_budget = (kl_q_p + std::log(2.0 * std::sqrt(m)) + dp_term) / m;
    r.risk_upper = kl_inverse_upper(emp_err, r.kl_budget);
    r.risk_lower = kl_inverse_lower(emp_err, r.kl_budget);
    r.vacuous = r.risk_upper >= detail::kKlClamp;
    return r;
}

// Hoeffding-style and Chernoff-style generalization bounds for the output of
// an epsilon-differentially-private learner. eps_bar = max{epsilon,
// sqrt(log(3/delta)/m)}; the slack is eps_bar + m^-1/2 (Hoeffding) or
// sqrt(6 emp)(eps_bar + m^-1/2) + 6(eps_bar^2 + 1/m) (Chernoff). Values are
// clamped to [0,1] with a vacuous flag.
struct TailBound {
    double value = 1.0;
    double eps_bar = 0.0;
    bool vacuous = false;
};

namespace detail {
inline double dp_eps_bar(double epsilon, double m, double delta) {
    if (!(m > 0.0)) throw std::invalid_argument("tail bound: need m > 0");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("tail bound: need delta in (0,1)");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("tail bound: need epsilon >= 0");
    return std::max(epsilon, std::sqrt(std::log(3.0 / delta) / m));
}
}  // namespace detail

inline TailBound h_bound(double emp_risk, double epsilon, double m, double delta) {
    if (!(emp_risk >= 0.0) || !(emp_risk <= 1.0))
        throw std::invalid_argument("h_bound: emp_risk outside [0,1]");
    TailBound b;
    b.eps_bar = detail::dp_eps_bar(epsilon, m, delta);
    const double raw = emp_risk + b.eps_bar + 1.0 / std::sqrt(m);
    b.vacuous = raw >= 1.0 || std::isinf(epsilon);
    b.value = std::min(raw, 1.0);
    return b;
}

inline TailBound c_bound(double emp_risk, double epsilon, double m, double delta) {
    if (!(emp_risk >= 0.0) || !(emp_risk <= 1.0))
        throw std::invalid_argument("c_bound: emp_risk outside [0,1]");
    TailBound b;
    b.eps_bar = detail::dp_eps_bar(epsilon, m, delta);
    const double slack = b.eps_bar + 1.0 / std::sqrt(m);
    const double raw = emp_risk + std::sqrt(6.0 * emp_risk) * slack +
                       6.0 * (b.eps_bar * b.eps_bar + 1.0 / m);
    b.vacuous = raw >= 1.0 || std::isinf(epsilon);
    b.value = std::min(raw, 1.0);
    return b;
}

// Monte Carlo estimate of KL(Gibbs || prior) from per-sample potentials
// ell = tau * emp_risk:
//   KL ~= -(mean of ell over chain samples) - log(mean of exp(-ell) over
//   prior samples), clamped at 0.
// The chain term's error comes from batch means (the chain is correlated);
// the prior term's from the delta method on the log. The prior average is a
// high-probability lower bound on the partition function, so the clamped
// estimate errs on the conservative (upper) side.
struct KlEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double term_chain = 0.0;
    double term_prior = 0.0;
    std::int64_t k_chain = 0;
    std::int64_t k_prior = 0;
};

inline KlEstimate kl_from_potentials(const std::vector<double>& chain_ell,
                                     const std::vector<double>& prior_ell) {
    if (chain_ell.empty() || prior_ell.empty())
        throw std::invalid_argument("kl_from_potentials: need samples on both sides");
    KlEstimate e;
    e.k_chain = static_cast<std::int64_t>(chain_ell.size());
    e.k_prior = static_cast<std::int64_t>(prior_ell.size());

    double sum = 0.0;
    for (double v : chain_ell) sum += v;
    e.term_chain = -sum / static_cast<double>(chain_ell.size());
    const double se_chain = detail::batch_means_stderr(chain_ell);

    // log-mean-exp of -ell over the prior draws
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : prior_ell) mx = std::max(mx, -v);
    double s = 0.0, s2 = 0.0;
    for (double v : prior_ell) {
        const double t = std::exp(-v - mx);
        s += t;
        s2 += t * t;
    }
    const double kp = static_cast<double>(prior_ell.size());
    const double mean_t = s / kp;
    e.term_prior = mx + std::log(mean_t);
    const double var_t = std::max(0.0, s2 / kp - mean_t * mean_t);
    const double se_prior = std::sqrt(var_t / kp) / mean_t;

    e.std_error = std::hypot(se_chain, se_prior);
    e.value = std::max(0.0, e.term_chain - e.term_prior);
    return e;
}

// Convenience wrapper: runs the Gibbs chain (10% burn-in, thinned) for the
// chain term and draws i.i.d. Gaussian prior samples for the partition term.
inline KlEstimate estimate_kl_gibbs_prior(const GibbsTarget& target, std::int64_t chain_steps,
                                          std::int64_t prior_samples, const ScheduleSpec& sched,
                                          RngStream& rng, int thin = 1) {
    target.validate();
    if (target.prior_kind != PriorKind::gaussian)
        throw std::invalid_argument("estimate_kl_gibbs_prior: needs a Gaussian prior");
    if (thin < 1) throw std::invalid_argument("estimate_kl_gibbs_prior: thin must be >= 1");
    if (prior_samples < 2) throw std::invalid_argument("estimate_kl_gibbs_prior: need k >= 2");
    const std::int64_t burn = chain_steps / 10;
    std::vector<double> chain_ell;
    sample_chain(target, chain_steps, sched, rng, [&](std::int64_t i, const WeightVector& w) {
        if (i > burn && (i - burn) % thin == 0) chain_ell.push_back(target.tau * target.risk(w));
    });
    if (chain_ell.empty())
        throw std::invalid_argument("estimate_kl_gibbs_prior: chain too short for burn-in/thin");

    const double sd = 1.0 / std::sqrt(target.tau * target.gamma);
    std::vector<double> prior_ell;
    prior_ell.reserve(static_cast<std::size_t>(prior_samples));
    WeightVector w(target.center.size());
    for (std::int64_t k = 0; k < prior_samples; ++k) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = target.center[j] + sd * rng.gaussian();
        prior_ell.push_back(target.tau * target.risk(w));
    }
    return kl_from_potentials(chain_ell, prior_ell);
}

// Residual of the change-of-measure identity on a finite support:
//   -log P[exp(-r)] = Q[r] + KL(Q||P) - KL(Q||P_{exp(-r)}).
// Exact enumeration; the residual is pure floating-point error.
inline double catoni_identity_residual(const std::vector<double>& p, const std::vector<double>& r,
                                       const std::vector<double>& q) {
    const std::size_t n = p.size();
    if (r.size() != n || q.size() != n || n == 0)
        throw std::invalid_argument("catoni_identity_residual: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0) || !std::isfinite(r[i]))
            throw std::invalid_argument("catoni_identity_residual: bad entry");
        if (q[i] > 0.0 && p[i] == 0.0)
            throw std::invalid_argument("catoni_identity_residual: Q charges atom " +
                                        std::to_string(i) + " outside the support of P");
    }
    // log Z = log sum p_i exp(-r_i), stabilised
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (p[i] > 0.0) mx = std::max(mx, std::log(p[i]) - r[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (p[i] > 0.0) z += std::exp(std::log(p[i]) - r[i] - mx);
    const double log_z = mx + std::log(z);

    double q_r = 0.0, kl_qp = 0.0, kl_qg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (q[i] <= 0.0) continue;
        q_r += q[i] * r[i];
        kl_qp += q[i] * (std::log(q[i]) - std::log(p[i]));
        const double log_g = std::log(p[i]) - r[i] - log_z;  // tilted distribution
        kl_qg += q[i] * (std::log(q[i]) - log_g);
    }
    const double lhs = -log_z;
    const double rhs = q_r + kl_qp - kl_qg;
    return std::fabs(lhs - rhs);
}

// Grid check that maximising the local free energy F(w) and minimising the
// linear PAC-Bayes objective at the Gibbs posterior pick the same centers.
// Both sides are computed by independent quadratures (F directly; the
// objective from E_Q[risk] and KL(Q||P) = -tau E_Q[risk] - log P[exp(-tau
// risk)]). tau is tied to lambda via tau = m/(lambda*l_max).
struct BruteforceCheck {
    std::vector<double> grid;
    std::vector<double> free_energy;
    std::vector<double> objective;
    std::vector<int> argmax_f;
    std::vector<int> argmin_objective;
    bool match = false;
};

inline BruteforceCheck thm_equivalence_bruteforce(const std::function<double(double)>& risk,
                                                  double w_lo, double w_hi, int n_grid,
                                                  double gamma, double tau, double lambda,
                                                  double l_max, double delta) {
    if (!(lambda > 0.5)) throw std::invalid_argument("thm_equivalence_bruteforce: lambda > 1/2");
    if (n_grid < 2) throw std::invalid_argument("thm_equivalence_bruteforce: need a real grid");
    const double m = lambda * l_max * tau;
    const double front = 1.0 / (1.0 - 0.5 / lambda);
    const double sigma = 1.0 / std::sqrt(tau * gamma);
    const double log_prior_norm = 0.5 * std::log(tau * gamma / (2.0 * 3.14159265358979323846));

    BruteforceCheck out;
    out.grid.resize(n_grid);
    out.free_energy.resize(n_grid);
    out.objective.resize(n_grid);

    for (int i = 0; i < n_grid; ++i) {
        const double w = w_lo + (w_hi - w_lo) * static_cast<double>(i) / (n_grid - 1);
        out.grid[i] = w;
        const auto le = local_entropy_quadrature_1d(risk, w, gamma, tau);
        out.free_energy[i] = le.log_partition;

        // E_Q[risk] via its own moment quadrature
        auto phi = [&](double x) {
            const double dx = x - w;
            return -tau * risk(x) - 0.5 * tau * gamma * dx * dx;
        };
        const double lo = w - 12.0 * sigma;
        const double hi = w + 12.0 * sigma;
        double phi_max = -std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 2000; ++k)
            phi_max = std::max(phi_max, phi(lo + (hi - lo) * static_cast<double>(k) / 2000));
        const double tol = 1e-12 * (hi - lo);
        const double mass = detail::composite_adaptive_simpson(
            [&](double x) { return std::exp(phi(x) - phi_max); }, lo, hi, 48, tol);
        const double risk_mom = detail::composite_adaptive_simpson(
            [&](double x) { return risk(x) * std::exp(phi(x) - phi_max); }, lo, hi, 48, tol);
        const double eq_risk = risk_mom / mass;
        // log P[exp(-tau risk)] with the prior density folded in
        const double log_partition_p = phi_max + std::log(mass) + log_prior_norm;
        const double kl_qp = -tau * eq_risk - log_partition_p;
        out.objective[i] =
            front * (eq_risk + lambda * l_max / m * (kl_qp + std::log(1.0 / delta)));
    }

    const double f_max = *std::max_element(out.free_energy.begin(), out.free_energy.end());
    const double f_min = *std::min_element(out.free_energy.begin(), out.free_energy.end());
    const double o_max = *std::max_element(out.objective.begin(), out.objective.end());
    const double o_min = *std::min_element(out.objective.begin(), out.objective.end());
    const double tol_f = 1e-9 * std::max(1.0, f_max - f_min);
    const double tol_o = 1e-9 * std::max(1.0, o_max - o_min);
    for (int i = 0; i < n_grid; ++i) {
        if (out.free_energy[i] >= f_max - tol_f) out.argmax_f.push_back(i);
        if (out.objective[i] <= o_min + tol_o) out.argmin_objective.push_back(i);
    }
    out.match = out.argmax_f == out.argmin_objective;
    return out;
}

}  // namespace entropia
