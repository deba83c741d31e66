#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace entropia {

// Polynomially decaying step size: step(t) = base * t^-exponent for t >= 1.
// outer() decays with exponent 0.6, inner() with exponent 1 (square-summable).
struct ScheduleSpec {
    double base = 0.0;
    double exponent = 0.0;

    static ScheduleSpec outer(double base) { return {base, 0.6}; }
    static ScheduleSpec inner(double base) { return {base, 1.0}; }
    static ScheduleSpec constant(double base) { return {base, 0.0}; }

    double step(std::int64_t t) const {
        if (t < 1) throw std::invalid_argument("ScheduleSpec: step index starts at 1");
        if (exponent == 0.0) return base;
        if (exponent == 1.0) return base / static_cast<double>(t);
        return base * std::pow(static_cast<double>(t), -exponent);
    }

    void validate() const {
        if (!(base > 0.0) || !std::isfinite(base))
            throw std::invalid_argument("ScheduleSpec: base step must be positive and finite");
        if (exponent < 0.0)
            throw std::invalid_argument("ScheduleSpec: exponent must be nonnegative");
    }
};

}  // namespace entropia
