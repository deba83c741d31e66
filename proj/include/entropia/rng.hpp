#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace entropia {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded random stream with a monotone draw counter. Gaussians use an
// explicit Box-Muller transform instead of std::normal_distribution so that
// identical (seed, draw sequence) pairs replay identical values on any
// standard library.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    // independent stream for a sub-task (evaluation chain, sweep point, ...)
    RngStream derive(std::uint64_t salt) const {
        return RngStream(splitmix64(seed_ ^ splitmix64(salt + 0x0d1f2e3c4b5a6978ULL)));
    }

    // uniform on [0, 1)
    double uniform() {
        ++counter_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // standard normal
    double gaussian() {
        ++counter_;
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite
        double u1 = 1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = two_pi() * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void gaussian_fill(std::vector<double>& out) {
        for (double& v : out) v = gaussian();
    }

    // uniform integer in [0, n), rejection sampled (no modulo bias)
    std::uint64_t uniform_below(std::uint64_t n) {
        ++counter_;
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double two_pi() { return 6.283185307179586476925286766559; }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace entropia
