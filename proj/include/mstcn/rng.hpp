#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mstcn/errors.hpp"

namespace mstcn {

// Seeded RNG with hand-rolled distributions.
//
// std::uniform_real_distribution and friends are implementation-defined, so
// drawing through them would break bit-reproducibility across toolchains.
// Everything here consumes mt19937_64 words in a fixed, documented way.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw InvalidArgument("Rng::uniform_int: n must be positive");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    // Box-Muller with cached spare.
    double gauss(double mean, double sigma) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + sigma * r * std::cos(theta);
    }

    // Knuth's product-of-uniforms method, split for large means so the
    // threshold exp(-mean) stays representable.
    int poisson(double mean) {
        if (mean < 0.0) throw InvalidArgument("Rng::poisson: mean must be >= 0");
        if (mean == 0.0) return 0;
        if (mean > 500.0) return poisson(mean / 2.0) + poisson(mean - mean / 2.0);
        const double threshold = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > threshold);
        return k - 1;
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mstcn
