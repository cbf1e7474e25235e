#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace adsim {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// A stream is identified by (seed, stream_id); draws within a stream are
// indexed by a 64-bit counter. Distinct streams are statistically
// independent, so per-patient / per-arm substreams can be generated in any
// order or concurrently and still produce identical data.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_{static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)} {}

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) {
            fill_block();
        }
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Strictly inside (0,1): 53-bit mantissa shifted off exact endpoints.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via inverse CDF; consumes exactly one uniform draw.
    double normal() { return inverse_normal_cdf(uniform01()); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Uniform index in [0, n); consumes exactly one uniform draw.
    std::size_t index(std::size_t n) {
        double u = uniform01();
        auto i = static_cast<std::size_t>(u * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Draw from a discrete distribution by CDF inversion; one uniform draw.
    // Probabilities are assumed nonnegative; a trailing shortfall from
    // rounding goes to the last category.
    std::size_t categorical(std::span<const double> probs) {
        double u = uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Acklam's rational approximation with one Halley refinement step;
    // absolute error is near machine precision across (0,1).
    static double inverse_normal_cdf(double p) {
        constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
        constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
        constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
        constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
        constexpr double p_low = 0.02425;

        double x;
        if (p < p_low) {
            double q = std::sqrt(-2.0 * std::log(p));
            x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        } else if (p <= 1.0 - p_low) {
            double q = p - 0.5;
            double r = q * q;
            x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
                (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
        } else {
            double q = std::sqrt(-2.0 * std::log(1.0 - p));
            x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
        }

        // Halley step against the exact CDF.
        double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
        double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
        return x - u / (1.0 + x * u / 2.0);
    }

private:
    static constexpr std::uint32_t kW32A = 0x9E3779B9u;
    static constexpr std::uint32_t kW32B = 0xBB67AE85u;
    static constexpr std::uint32_t kM4x32A = 0xD2511F53u;
    static constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

    static void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
        std::uint64_t product = static_cast<std::uint64_t>(a) * b;
        lo = static_cast<std::uint32_t>(product);
        hi = static_cast<std::uint32_t>(product >> 32);
    }

    void fill_block() {
        std::uint32_t ctr[4] = {static_cast<std::uint32_t>(counter_),
                                static_cast<std::uint32_t>(counter_ >> 32), stream_[0], stream_[1]};
        std::uint32_t key[2] = {key_[0], key_[1]};
        for (int round = 0; round < 10; ++round) {
            std::uint32_t lo0, hi0, lo1, hi1;
            mul_hilo(kM4x32A, ctr[0], lo0, hi0);
            mul_hilo(kM4x32B, ctr[2], lo1, hi1);
            std::uint32_t next[4] = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            ctr[0] = next[0];
            ctr[1] = next[1];
            ctr[2] = next[2];
            ctr[3] = next[3];
            key[0] += kW32A;
            key[1] += kW32B;
        }
        buf_ = {ctr[0], ctr[1], ctr[2], ctr[3]};
        buf_pos_ = 0;
        ++counter_;
    }

    std::uint32_t key_[2];
    std::uint32_t stream_[2];
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
};

// Purpose tags keep substreams for unrelated subsystems disjoint even when
// they share index ranges (patient i vs arm i, etc).
enum class StreamPurpose : std::uint64_t {
    simulation = 0,
    subtype = 1,
    gmm_init = 2,
    estimator = 3,
    holdout = 4,
    generic = 5,
};

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
    return (static_cast<std::uint64_t>(purpose) << 56) | (index & 0x00FF'FFFF'FFFF'FFFFull);
}

inline RngStream make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    return RngStream(seed, stream_id(purpose, index));
}

}  // namespace adsim
