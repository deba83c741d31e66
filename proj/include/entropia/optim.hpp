#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropia/nn.hpp"
#include "entropia/rng.hpp"
#include "entropia/schedule.hpp"

namespace entropia {

inline constexpr double kDivergenceLimit = 1e8;

inline void check_finite_weights(const WeightVector& w, const char* where) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || std::fabs(w[i]) > kDivergenceLimit)
            throw std::runtime_error(std::string(where) + ": weight coordinate " +
                                     std::to_string(i) + " diverged (value " +
                                     std::to_string(w[i]) + ", limit 1e8)");
    }
}

// Knobs of the local-entropy optimizer. tau is the Gibbs inverse temperature,
// gamma the prior precision scale, beta the outer inverse temperature.
// base_rate is the base learning rate; unless overridden, the outer base step
// is base_rate/(gamma*tau) (decay t^-0.6) and the inner base step is 2/tau
// (decay 1/i), which makes the inner thermal noise sqrt(2/tau).
struct LocalEntropyConfig {
    double gamma = 1.0;
    double tau = 0.0;  // must be set; +inf = zero thermal noise (plain sgd)
    double beta = 1.0;
    int inner_steps = 20;   // L
    int minibatch = 128;    // K
    double alpha = 0.75;    // inner averaging weight
    double base_rate = 0.006;
    double eta = 0.0;        // outer base step override (0 = derive)
    double eta_prime = 0.0;  // inner base step override (0 = derive)

    double outer_base_step() const { return eta > 0.0 ? eta : base_rate / (gamma * tau); }
    double inner_base_step() const { return eta_prime > 0.0 ? eta_prime : 2.0 / tau; }
    double thermal_noise() const { return std::isinf(tau) ? 0.0 : std::sqrt(2.0 / tau); }

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("LocalEntropyConfig: tau must be positive");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw std::invalid_argument("LocalEntropyConfig: gamma must be positive and finite");
        if (!(beta > 0.0)) throw std::invalid_argument("LocalEntropyConfig: beta must be positive");
        if (inner_steps < 1) throw std::invalid_argument("LocalEntropyConfig: need inner_steps >= 1");
        if (minibatch < 1) throw std::invalid_argument("LocalEntropyConfig: need minibatch >= 1");
        if (!(alpha > 0.0) || alpha > 1.0)
            throw std::invalid_argument("LocalEntropyConfig: alpha must lie in (0, 1]");
        if (!(base_rate > 0.0))
            throw std::invalid_argument("LocalEntropyConfig: base_rate must be positive");
        if (eta < 0.0 || eta_prime < 0.0)
            throw std::invalid_argument("LocalEntropyConfig: step overrides must be >= 0");
    }
};

// One Langevin move: w += step/2 * grad + sqrt(step/inv_temp) * N(0, I).
// inv_temp = +inf means a plain half-gradient step; no noise is drawn then,
// so noiseless and noisy runs sharing a seed stay aligned.
inline void sgld_step(WeightVector& w, const WeightVector& grad_estimate, double step,
                      double inv_temp, RngStream& rng) {
    if (w.size() != grad_estimate.size())
        throw std::invalid_argument("sgld_step: gradient size does not match weights");
    if (!(step >= 0.0) || !std::isfinite(step))
        throw std::invalid_argument("sgld_step: step must be finite and >= 0");
    if (!(inv_temp > 0.0)) throw std::invalid_argument("sgld_step: inv_temp must be positive");
    for (std::size_t i = 0; i < grad_estimate.size(); ++i)
        if (!std::isfinite(grad_estimate[i]))
            throw std::runtime_error("sgld_step: gradient coordinate " + std::to_string(i) +
                                     " is not finite");
    const double half = 0.5 * step;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += half * grad_estimate[i];
    if (step > 0.0 && !std::isinf(inv_temp)) {
        const double noise = std::sqrt(step / inv_temp);
        for (double& v : w) v += noise * rng.gaussian();
    }
}

// Epoch-shuffled minibatch source: indices are drawn without replacement
// within an epoch and the order is reshuffled (from the caller's stream) when
// fewer than a full batch remains.
class MinibatchSampler {
public:
    explicit MinibatchSampler(int m) : order_(m) {
        if (m < 1) throw std::invalid_argument("MinibatchSampler: need m >= 1");
        for (int i = 0; i < m; ++i) order_[i] = i;
        pos_ = order_.size();  // force a shuffle on first use
    }

    std::span<const int> next(int k, RngStream& rng) {
        if (k < 1 || k > static_cast<int>(order_.size()))
            throw std::invalid_argument("MinibatchSampler: batch size must lie in [1, m]");
        if (pos_ + k > order_.size()) {
            rng.shuffle(order_);
            pos_ = 0;
        }
        std::span<const int> batch(order_.data() + pos_, static_cast<std::size_t>(k));
        pos_ += k;
        return batch;
    }

private:
    std::vector<int> order_;
    std::size_t pos_ = 0;
};

// L steps of SGLD on the local free energy around w; returns the exponential
// moving average mu of the iterates (mu starts at w). Step i uses
// eta_i = eta_prime/i, drift -tau*grad_batch - gamma*tau*(w' - w), and noise
// sqrt(eta_i) per coordinate.
inline WeightVector inner_loop_estimate(const NetworkSpec& spec, const WeightVector& w,
                                        const LabeledDataset& data, const LocalEntropyConfig& cfg,
                                        double l_max, MinibatchSampler& sampler, RngStream& rng) {
    cfg.validate();
    if (!std::isfinite(cfg.tau))
        throw std::invalid_argument("inner_loop_estimate: tau must be finite");
    WeightVector wp = w;
    WeightVector mu = w;
    WeightVector grad;
    detail::Scratch scratch;
    const double eta_prime = cfg.inner_base_step();
    const int k = std::min(cfg.minibatch, data.m);  // oversized K means full batch
    for (int i = 1; i <= cfg.inner_steps; ++i) {
        const double eta_i = eta_prime / static_cast<double>(i);
        auto batch = sampler.next(k, rng);
        grad_empirical_risk_into(spec, wp, data, l_max, batch, grad, scratch);
        const double half = 0.5 * eta_i;
        const double noise = std::sqrt(eta_i);
        for (std::size_t j = 0; j < wp.size(); ++j) {
            const double drift = -cfg.tau * grad[j] - cfg.gamma * cfg.tau * (wp[j] - w[j]);
            wp[j] += half * drift + noise * rng.gaussian();
        }
        check_finite_weights(wp, "inner_loop_estimate");
        for (std::size_t j = 0; j < wp.size(); ++j)
            mu[j] = (1.0 - cfg.alpha) * mu[j] + cfg.alpha * wp[j];
    }
    return mu;
}

inline WeightVector inner_loop_estimate(const NetworkSpec& spec, const WeightVector& w,
                                        const LabeledDataset& data, const LocalEntropyConfig& cfg,
                                        double l_max, RngStream& rng) {
    MinibatchSampler sampler(data.m);
    return inner_loop_estimate(spec, w, data, cfg, l_max, sampler, rng);
}

// Outer move toward the inner average: w += step/2 * tau*gamma * (mu - w),
// plus sqrt(step/beta) Gaussian noise when langevin is set. The drift
// direction is toward mu: tau*gamma*(mu - w) estimates the local-entropy
// gradient, and the step ascends it.
inline void outer_step(WeightVector& w, const WeightVector& mu, double step,
                       const LocalEntropyConfig& cfg, bool langevin, RngStream& rng) {
    if (w.size() != mu.size()) throw std::invalid_argument("outer_step: size mismatch");
    if (!(step >= 0.0) || !std::isfinite(step))
        throw std::invalid_argument("outer_step: step must be finite and >= 0");
    const double half_tg = 0.5 * step * cfg.tau * cfg.gamma;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += half_tg * (mu[i] - w[i]);

    // beta = +inf means zero outer noise; skip the draws entirely so the
    // noiseless run consumes the same stream as entropy_sgd
    if (langevin && step > 0.0 && !std::isinf(cfg.beta)) {
        const double noise = std::sqrt(step / cfg.beta);
        for (double& v : w) v += noise * rng.gaussian();
    }
}

// Runs the inner loop twice with shared noise: once in the printed
// parameterisation (drift scaled by tau, noise sqrt(eta_i)) and once in the
// rescaled one (eta~ = eta*tau/2, plain risk gradient drift, thermal factor
// sqrt(2/tau)). Returns the max absolute coordinate gap across all L steps;
// the two parameterisations are algebraically identical.
inline double rescaled_inner_equivalence(const NetworkSpec& spec, const WeightVector& w,
                                         const LabeledDataset& data,
                                         const LocalEntropyConfig& cfg, double l_max,
                                         std::uint64_t noise_seed) {
    cfg.validate();
    if (!std::isfinite(cfg.tau))
        throw std::invalid_argument("rescaled_inner_equivalence: tau must be finite");
    const double eta_prime = cfg.inner_base_step();
    const double eta_tilde = 0.5 * eta_prime * cfg.tau;
    const double thermal = std::sqrt(2.0 / cfg.tau);

    WeightVector wa = w, wb = w;
    WeightVector grad;
    detail::Scratch scratch;
    double max_gap = 0.0;

    RngStream rng_batch(noise_seed);        // shared minibatch sequence
    RngStream rng_noise_a(noise_seed + 1);  // identical Gaussian draws per run
    RngStream rng_noise_b(noise_seed + 1);
    MinibatchSampler sampler(data.m);
    std::vector<int> batch_copy;
    const int k = std::min(cfg.minibatch, data.m);

    for (int i = 1; i <= cfg.inner_steps; ++i) {
        auto batch = sampler.next(k, rng_batch);
        batch_copy.assign(batch.begin(), batch.end());

        // printed form
        {
            const double eta_i = eta_prime / static_cast<double>(i);
            grad_empirical_risk_into(spec, wa, data, l_max, batch_copy, grad, scratch);
            const double half = 0.5 * eta_i;
            const double noise = std::sqrt(eta_i);
            for (std::size_t j = 0; j < wa.size(); ++j) {
                const double drift = -cfg.tau * grad[j] - cfg.gamma * cfg.tau * (wa[j] - w[j]);
                wa[j] += half * drift + noise * rng_noise_a.gaussian();
            }
        }
        // rescaled form
        {
            const double eta_i = eta_tilde / static_cast<double>(i);
            grad_empirical_risk_into(spec, wb, data, l_max, batch_copy, grad, scratch);
            const double noise = std::sqrt(eta_i) * thermal;
            for (std::size_t j = 0; j < wb.size(); ++j) {
                const double drift = -grad[j] - cfg.gamma * (wb[j] - w[j]);
                wb[j] += eta_i * drift + noise * rng_noise_b.gaussian();
            }
        }
        for (std::size_t j = 0; j < wa.size(); ++j)
            max_gap = std::max(max_gap, std::fabs(wa[j] - wb[j]));
    }
    return max_gap;
}

enum class Algorithm { sgd, sgld, entropy_sgd, entropy_sgld };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::sgd: return "sgd";
        case Algorithm::sgld: return "sgld";
        case Algorithm::entropy_sgd: return "entropy_sgd";
        case Algorithm::entropy_sgld: return "entropy_sgld";
    }
    return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
    if (s == "sgd") return Algorithm::sgd;
    if (s == "sgld") return Algorithm::sgld;
    if (s == "entropy_sgd") return Algorithm::entropy_sgd;
    if (s == "entropy_sgld") return Algorithm::entropy_sgld;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

struct TrainResult {
    WeightVector weights;
    std::vector<WeightVector> tick_weights;  // filled when record_trajectory is set
    int ticks = 0;
};

using TickCallback = std::function<void(int tick, const WeightVector& w)>;

// Trains for `epochs` ticks and invokes the callback once per tick.
// sgd/sgld: an epoch is floor(m/K) minibatch steps (at least 1); per-step
// learning rate base_rate * t^-0.6 on the mean bounded-cross-entropy
// gradient, plus thermal noise sqrt(step)*sqrt(2/tau) for sgld. sgd is sgld
// with infinite inverse temperature: same code path, noise skipped.
// entropy_sgd/entropy_sgld: an epoch is floor(m/(L*K)) outer steps (at least
// 1), each consuming L inner minibatches; outer step eta_t = eta * t^-0.6.
// entropy_sgd is entropy_sgld without the outer Langevin noise.
inline TrainResult run_training(Algorithm alg, const NetworkSpec& spec, const LabeledDataset& data,
                                const LocalEntropyConfig& cfg, int epochs, double l_max,
                                RngStream& rng, const TickCallback& callback = {},
                                bool record_trajectory = false) {
    cfg.validate();
    spec.validate();
    data.validate();
    if (epochs < 1) throw std::invalid_argument("run_training: need epochs >= 1");
    const bool entropy = (alg == Algorithm::entropy_sgd || alg == Algorithm::entropy_sgld);
    if (entropy && !std::isfinite(cfg.tau))
        throw std::invalid_argument("run_training: entropy algorithms need finite tau");

    TrainResult result;
    result.weights = init_weights(spec, rng);
    MinibatchSampler sampler(data.m);
    WeightVector grad;
    detail::Scratch scratch;
    std::int64_t t = 0;

    if (entropy) {
        const bool langevin = (alg == Algorithm::entropy_sgld);
        const ScheduleSpec sched = ScheduleSpec::outer(cfg.outer_base_step());
        const int steps_per_epoch =
            std::max(1, data.m / (cfg.inner_steps * std::min(cfg.minibatch, data.m)));
        for (int epoch = 1; epoch <= epochs; ++epoch) {
            for (int s = 0; s < steps_per_epoch; ++s) {
                ++t;
                WeightVector mu = inner_loop_estimate(spec, result.weights, data, cfg, l_max,
                                                      sampler, rng);
                outer_step(result.weights, mu, sched.step(t), cfg, langevin, rng);
                check_finite_weights(result.weights, "run_training");
            }
            ++result.ticks;
            if (record_trajectory) result.tick_weights.push_back(result.weights);
            if (callback) callback(result.ticks, result.weights);
        }
    } else {
        const double thermal = (alg == Algorithm::sgd) ? 0.0 : cfg.thermal_noise();
        const int k = std::min(cfg.minibatch, data.m);
        const int steps_per_epoch = std::max(1, data.m / k);
        for (int epoch = 1; epoch <= epochs; ++epoch) {
            for (int s = 0; s < steps_per_epoch; ++s) {
                ++t;
                const double lr = cfg.base_rate * std::pow(static_cast<double>(t), -0.6);
                auto batch = sampler.next(k, rng);
                grad_empirical_risk_into(spec, result.weights, data, l_max, batch, grad, scratch);
                for (std::size_t j = 0; j < result.weights.size(); ++j)
                    result.weights[j] -= lr * grad[j];
                if (thermal > 0.0) {
                    const double noise = std::sqrt(lr) * thermal;
                    for (double& v : result.weights) v += noise * rng.gaussian();
                }
                check_finite_weights(result.weights, "run_training");
            }
            ++result.ticks;
            if (record_trajectory) result.tick_weights.push_back(result.weights);
            if (callback) callback(result.ticks, result.weights);
        }
    }
    return result;
}

}  // namespace entropia
