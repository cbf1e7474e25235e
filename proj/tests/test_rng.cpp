#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "adsim/rng.hpp"

using adsim::RngStream;

TEST_CASE("streams are deterministic and independent of creation order", "[rng]") {
    RngStream a(42, 7);
    RngStream b(42, 7);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }

    // Different stream ids diverge immediately.
    RngStream c(42, 8);
    RngStream d(42, 7);
    int differing = 0;
    for (int i = 0; i < 16; ++i) {
        if (c.next_u64() != d.next_u64()) ++differing;
    }
    REQUIRE(differing > 12);
}

TEST_CASE("uniform01 stays strictly inside (0,1) and is roughly uniform", "[rng]") {
    RngStream rng(1, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform01();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // Mean of n uniforms: sd = 1/sqrt(12 n) ~ 0.0009; allow 5 sigma.
    REQUIRE(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("inverse normal CDF matches erfc at reference points", "[rng]") {
    // Round-trip check: Phi(Phi^-1(p)) == p to near machine precision.
    for (double p : {1e-9, 1e-4, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.9999, 1.0 - 1e-9}) {
        double x = RngStream::inverse_normal_cdf(p);
        double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
        REQUIRE(back == Catch::Approx(p).epsilon(1e-10).margin(1e-13));
    }
    REQUIRE(RngStream::inverse_normal_cdf(0.5) == Catch::Approx(0.0).margin(1e-12));
    // Standard quantile: Phi^-1(0.975) = 1.9599639845400545
    REQUIRE(RngStream::inverse_normal_cdf(0.975) == Catch::Approx(1.9599639845400545).margin(1e-9));
}

TEST_CASE("normal draws have the right first two moments", "[rng]") {
    RngStream rng(9, 3);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    REQUIRE(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(var == Catch::Approx(1.0).epsilon(0.02));
}

TEST_CASE("categorical draw matches probabilities", "[rng]") {
    RngStream rng(5, 1);
    std::vector<double> probs{0.2, 0.5, 0.3};
    std::vector<int> counts(3, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
    for (std::size_t c = 0; c < probs.size(); ++c) {
        double se = std::sqrt(probs[c] * (1 - probs[c]) / n);
        REQUIRE(std::abs(static_cast<double>(counts[c]) / n - probs[c]) < 4 * se);
    }
}

TEST_CASE("purpose tags separate substreams", "[rng]") {
    auto a = adsim::make_stream(11, adsim::StreamPurpose::simulation, 0);
    auto b = adsim::make_stream(11, adsim::StreamPurpose::subtype, 0);
    REQUIRE(a.next_u64() != b.next_u64());
}
