#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropia/rng.hpp"

namespace entropia {

using WeightVector = std::vector<double>;

enum class OutputKind { sigmoid_binary, softmax_multiclass };

// Fully connected ReLU network. layer_widths = {input, hidden..., output}.
struct NetworkSpec {
    std::vector<int> layer_widths;
    OutputKind output_kind = OutputKind::sigmoid_binary;

    int input_dim() const { return layer_widths.front(); }
    int output_dim() const { return layer_widths.back(); }
    int depth() const { return static_cast<int>(layer_widths.size()) - 1; }

    int param_count() const {
        int p = 0;
        for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
            p += (layer_widths[l] + 1) * layer_widths[l + 1];
        return p;
    }

    void validate() const {
        if (layer_widths.size() < 2)
            throw std::invalid_argument("NetworkSpec: need at least input and output layers");
        for (int w : layer_widths)
            if (w <= 0) throw std::invalid_argument("NetworkSpec: layer widths must be positive");
        if (output_kind == OutputKind::sigmoid_binary && layer_widths.back() != 1)
            throw std::invalid_argument("NetworkSpec: sigmoid output needs width 1");
        if (output_kind == OutputKind::softmax_multiclass && layer_widths.back() < 2)
            throw std::invalid_argument("NetworkSpec: softmax output needs width >= 2");
    }
};

enum class LabelMode { true_labels, random_labels };

struct LabeledDataset {
    int m = 0;
    int d = 0;
    int num_classes = 2;
    std::vector<double> x;  // row major, m * d
    std::vector<int> y;     // values in [0, num_classes)
    LabelMode label_mode = LabelMode::true_labels;
    std::uint64_t label_seed = 0;

    std::span<const double> example(int i) const {
        return std::span<const double>(x.data() + static_cast<std::size_t>(i) * d, d);
    }

    void validate() const {
        if (m < 0 || d <= 0) throw std::invalid_argument("LabeledDataset: bad shape");
        if (num_classes < 2) throw std::invalid_argument("LabeledDataset: need >= 2 classes");
        if (x.size() != static_cast<std::size_t>(m) * d || y.size() != static_cast<std::size_t>(m))
            throw std::invalid_argument("LabeledDataset: buffer sizes do not match m, d");
        for (int v : y)
            if (v < 0 || v >= num_classes)
                throw std::invalid_argument("LabeledDataset: label outside [0, num_classes)");
    }
};

enum class LossKind { zero_one, bounded_cross_entropy, ramp };

// Loss selector. bounded_cross_entropy carries l_max, ramp carries slope.
struct Loss {
    LossKind kind = LossKind::zero_one;
    double param = 0.0;

    static Loss zero_one() { return {LossKind::zero_one, 0.0}; }
    static Loss bounded_ce(double l_max = 4.0) {
        if (!(l_max > 0.0)) throw std::invalid_argument("bounded_ce: l_max must be positive");
        return {LossKind::bounded_cross_entropy, l_max};
    }
    static Loss ramp(double slope = 1e6) {
        if (!(slope > 0.0)) throw std::invalid_argument("ramp: slope must be positive");
        return {LossKind::ramp, slope};
    }
};

// Affine squash of a probability into [e^-l_max, 1 - e^-l_max]; composing with
// -log keeps the cross entropy inside (0, l_max].
inline double psi_clamp(double p, double l_max) {
    double a = std::exp(-l_max);
    return a + (1.0 - 2.0 * a) * p;
}

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

namespace detail {

// per-call workspace so risk loops do not allocate per example
struct Scratch {
    std::vector<double> a0, a1;               // activation ping-pong
    std::vector<std::vector<double>> acts;    // saved activations for backprop
    std::vector<double> delta0, delta1;
};

inline void forward_into(const NetworkSpec& spec, const WeightVector& w,
                         std::span<const double> x, Scratch& s, bool keep_acts) {
    const auto& widths = spec.layer_widths;
    if (static_cast<int>(x.size()) != widths.front())
        throw std::invalid_argument("forward: input has dim " + std::to_string(x.size()) +
                                    ", network expects " + std::to_string(widths.front()));
    if (static_cast<int>(w.size()) != spec.param_count())
        throw std::invalid_argument("forward: weight vector has " + std::to_string(w.size()) +
                                    " entries, network expects " + std::to_string(spec.param_count()));

    if (keep_acts) s.acts.resize(widths.size());
    s.a0.assign(x.begin(), x.end());
    if (keep_acts) s.acts[0] = s.a0;

    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int n_in = widths[l];
        const int n_out = widths[l + 1];
        const double* W = w.data() + off;
        const double* b = W + static_cast<std::size_t>(n_in) * n_out;
        s.a1.assign(n_out, 0.0);
        for (int j = 0; j < n_out; ++j) {
            const double* row = W + static_cast<std::size_t>(j) * n_in;
            double z = b[j];
            for (int i = 0; i < n_in; ++i) z += row[i] * s.a0[i];
            s.a1[j] = z;
        }
        const bool last = (l + 2 == widths.size());
        if (!last) {
            for (double& v : s.a1) v = v > 0.0 ? v : 0.0;  // relu
        } else if (spec.output_kind == OutputKind::sigmoid_binary) {
            s.a1[0] = sigmoid(s.a1[0]);
        } else {
            double zmax = *std::max_element(s.a1.begin(), s.a1.end());
            double sum = 0.0;
            for (double& v : s.a1) {
                v = std::exp(v - zmax);
                sum += v;
            }
            for (double& v : s.a1) v /= sum;
        }
        off += static_cast<std::size_t>(n_in + 1) * n_out;
        s.a0.swap(s.a1);
        if (keep_acts) s.acts[l + 1] = s.a0;
    }
    // result lives in s.a0
}

}  // namespace detail

// Output probabilities for one example: {p} for sigmoid, class vector for softmax.
inline std::vector<double> forward(const NetworkSpec& spec, const WeightVector& w,
                                   std::span<const double> x) {
    detail::Scratch s;
    detail::forward_into(spec, w, x, s, false);
    return s.a0;
}

// Per-example loss given the forward output.
inline double loss_from_output(const Loss& loss, const NetworkSpec& spec,
                               std::span<const double> out, int y) {
    const bool binary = spec.output_kind == OutputKind::sigmoid_binary;
    if (binary && (y < 0 || y > 1))
        throw std::invalid_argument("loss: binary output needs labels in {0,1}");
    if (!binary && (y < 0 || y >= static_cast<int>(out.size())))
        throw std::invalid_argument("loss: label outside softmax width");

    switch (loss.kind) {
        case LossKind::zero_one: {
            if (binary) {
                double p = out[0];
                bool correct = (y == 1) ? (p > 0.5) : (p < 0.5);  // ties are errors
                return correct ? 0.0 : 1.0;
            }
            double py = out[y];
            for (int k = 0; k < static_cast<int>(out.size()); ++k)
                if (k != y && out[k] >= py) return 1.0;  // tied maxima are errors
            return 0.0;
        }
        case LossKind::bounded_cross_entropy: {
            const double l_max = loss.param;
            if (binary) {
                double q = psi_clamp(out[0], l_max);
                return y == 1 ? -std::log(q) : -std::log(1.0 - q);
            }
            return -std::log(psi_clamp(out[y], l_max));
        }
        case LossKind::ramp: {
            double t;
            if (binary) {
                t = (2.0 * y - 1.0) * (2.0 * out[0] - 1.0);
            } else {
                double best_other = -1.0;
                for (int k = 0; k < static_cast<int>(out.size()); ++k)
                    if (k != y) best_other = std::max(best_other, out[k]);
                t = out[y] - best_other;
            }
            if (t <= 0.0) return 1.0;
            double v = 1.0 - loss.param * t;
            return v > 0.0 ? v : 0.0;
        }
    }
    throw std::logic_error("loss: unknown kind");
}

inline double example_loss(const Loss& loss, const NetworkSpec& spec, const WeightVector& w,
                           std::span<const double> x, int y) {
    detail::Scratch s;
    detail::forward_into(spec, w, x, s, false);
    return loss_from_output(loss, spec, s.a0, y);
}

// Mean loss over the dataset, or over `indices` when given.
inline double empirical_risk(const Loss& loss, const NetworkSpec& spec, const WeightVector& w,
                             const LabeledDataset& data, std::span<const int> indices = {}) {
    const std::size_t n = indices.empty() ? static_cast<std::size_t>(data.m) : indices.size();
    if (n == 0) throw std::invalid_argument("empirical_risk: empty dataset");
    detail::Scratch s;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        int i = indices.empty() ? static_cast<int>(k) : indices[k];
        detail::forward_into(spec, w, data.example(i), s, false);
        total += loss_from_output(loss, spec, s.a0, data.y[i]);
    }
    return total / static_cast<double>(n);
}

// Gradient of the mean bounded cross entropy over the dataset (or `indices`).
// Backprop through relu hiddens and the sigmoid/softmax head composed with the
// affine clamp.
inline void grad_empirical_risk_into(const NetworkSpec& spec, const WeightVector& w,
                                     const LabeledDataset& data, double l_max,
                                     std::span<const int> indices, WeightVector& grad,
                                     detail::Scratch& s) {
    const std::size_t n = indices.empty() ? static_cast<std::size_t>(data.m) : indices.size();
    if (n == 0) throw std::invalid_argument("grad_empirical_risk: empty dataset");
    const auto& widths = spec.layer_widths;
    grad.assign(spec.param_count(), 0.0);
    const double shrink = 1.0 - 2.0 * std::exp(-l_max);  // psi'(p)

    for (std::size_t kk = 0; kk < n; ++kk) {
        const int i = indices.empty() ? static_cast<int>(kk) : indices[kk];
        detail::forward_into(spec, w, data.example(i), s, true);
        const int y = data.y[i];

        // delta at the pre-activation of the output layer
        const auto& out = s.acts.back();
        if (spec.output_kind == OutputKind::sigmoid_binary) {
            if (y < 0 || y > 1)
                throw std::invalid_argument("grad_empirical_risk: binary labels must be 0/1");
            double p = out[0];
            double q = psi_clamp(p, l_max);
            double dldp = (y == 1) ? -shrink / q : shrink / (1.0 - q);
            s.delta0.assign(1, dldp * p * (1.0 - p));
        } else {
            if (y < 0 || y >= static_cast<int>(out.size()))
                throw std::invalid_argument("grad_empirical_risk: label outside softmax width");
            double py = out[y];
            double c = shrink * py / psi_clamp(py, l_max);
            s.delta0.assign(out.size(), 0.0);
            for (int k = 0; k < static_cast<int>(out.size()); ++k)
                s.delta0[k] = c * (out[k] - (k == y ? 1.0 : 0.0));
        }

        // walk layers backwards
        std::size_t off_end = w.size();
        for (int l = spec.depth() - 1; l >= 0; --l) {
            const int n_in = widths[l];
            const int n_out = widths[l + 1];
            const std::size_t off = off_end - static_cast<std::size_t>(n_in + 1) * n_out;
            const double* W = w.data() + off;
            double* gW = grad.data() + off;
            double* gb = gW + static_cast<std::size_t>(n_in) * n_out;
            const auto& a_prev = s.acts[l];

            for (int j = 0; j < n_out; ++j) {
                const double dj = s.delta0[j];
                double* grow = gW + static_cast<std::size_t>(j) * n_in;
                for (int ii = 0; ii < n_in; ++ii) grow[ii] += dj * a_prev[ii];
                gb[j] += dj;
            }
            if (l > 0) {
                s.delta1.assign(n_in, 0.0);
                for (int j = 0; j < n_out; ++j) {
                    const double dj = s.delta0[j];
                    const double* row = W + static_cast<std::size_t>(j) * n_in;
                    for (int ii = 0; ii < n_in; ++ii) s.delta1[ii] += dj * row[ii];
                }
                for (int ii = 0; ii < n_in; ++ii)
                    if (a_prev[ii] <= 0.0) s.delta1[ii] = 0.0;  // relu gate
                s.delta0.swap(s.delta1);
            }
            off_end = off;
        }
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= scale;
}

inline WeightVector grad_empirical_risk(const NetworkSpec& spec, const WeightVector& w,
                                        const LabeledDataset& data, double l_max,
                                        std::span<const int> indices = {}) {
    WeightVector grad;
    detail::Scratch s;
    grad_empirical_risk_into(spec, w, data, l_max, indices, grad, s);
    return grad;
}

// He-style init: weights ~ N(0, 2/fan_in), biases zero.
inline WeightVector init_weights(const NetworkSpec& spec, RngStream& rng) {
    spec.validate();
    WeightVector w(spec.param_count(), 0.0);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const int n_in = spec.layer_widths[l];
        const int n_out = spec.layer_widths[l + 1];
        const double sd = std::sqrt(2.0 / n_in);
        for (int k = 0; k < n_in * n_out; ++k) w[off + k] = sd * rng.gaussian();
        off += static_cast<std::size_t>(n_in + 1) * n_out;  // biases stay zero
    }
    return w;
}

}  // namespace entropia
