#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "backvis/tensor.hpp"

namespace backvis {

enum class Dist { Gaussian, TruncatedGaussian };

/// Seeded sampling spec. TruncatedGaussian resamples (never clamps) values
/// with |v - mean| > clip_sigmas * std, so no probability mass piles up at
/// the clip boundary.
struct RngSpec {
    std::uint64_t seed = 0;
    Dist dist = Dist::Gaussian;
    double mean = 0.0;
    double stddev = 1.0;
    double clip_sigmas = 2.0;

    static RngSpec gaussian(std::uint64_t seed, double mean, double stddev) {
        return RngSpec{seed, Dist::Gaussian, mean, stddev, 2.0};
    }
    static RngSpec truncated(std::uint64_t seed, double mean, double stddev, double clip_sigmas = 2.0) {
        return RngSpec{seed, Dist::TruncatedGaussian, mean, stddev, clip_sigmas};
    }
    RngSpec with_seed(std::uint64_t s) const {
        RngSpec r = *this;
        r.seed = s;
        return r;
    }
};

/// Deterministic normal stream: mt19937_64 + hand-rolled Box-Muller, so the
/// sequence does not depend on the standard library's distribution
/// implementation. Identical seed + spec -> bit-identical stream.
class NormalStream {
  public:
    explicit NormalStream(const RngSpec& spec) : spec_(spec), eng_(spec.seed) {
        if (spec.stddev <= 0.0) throw std::invalid_argument("RngSpec: stddev must be > 0");
    }

    double next() {
        if (spec_.dist == Dist::Gaussian) return spec_.mean + spec_.stddev * next_unit();
        const double bound = spec_.clip_sigmas * spec_.stddev;
        for (;;) {
            double v = spec_.stddev * next_unit();
            if (std::abs(v) <= bound) return spec_.mean + v;
        }
    }

    void fill(Tensor& t) {
        for (auto& v : t.data) v = next();
    }

  private:
    double uniform01() {
        // 53-bit mantissa uniform in [0,1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double next_unit() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0,1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    RngSpec spec_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline Tensor sample(const RngSpec& spec, Shape shape) {
    NormalStream s(spec);
    Tensor t(std::move(shape));
    s.fill(t);
    return t;
}

}  // namespace backvis
