#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "adsim/errors.hpp"
#include "adsim/rng.hpp"

namespace adsim {

// Two-component univariate Gaussian mixture; components are ordered by mean
// ascending, so "component 1" is always the upper mode.
struct Gmm1D {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 1.0};
    std::array<double, 2> sds{1.0, 1.0};

    double log_density(double x) const {
        double l0 = std::log(weights[0]) + log_normal_pdf(x, means[0], sds[0]);
        double l1 = std::log(weights[1]) + log_normal_pdf(x, means[1], sds[1]);
        double m = std::max(l0, l1);
        return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    }

    static double log_normal_pdf(double x, double mean, double sd) {
        double z = (x - mean) / sd;
        return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
    }
};

// Posterior probability that `value` came from component 1 (upper mode).
inline double posterior_z(const Gmm1D& model, double value) {
    double l0 = std::log(model.weights[0]) + Gmm1D::log_normal_pdf(value, model.means[0], model.sds[0]);
    double l1 = std::log(model.weights[1]) + Gmm1D::log_normal_pdf(value, model.means[1], model.sds[1]);
    double m = std::max(l0, l1);
    double e0 = std::exp(l0 - m);
    double e1 = std::exp(l1 - m);
    return e1 / (e0 + e1);
}

// Hard label with ties resolved to component 0.
inline int hard_label(const Gmm1D& model, double value) {
    return posterior_z(model, value) > 0.5 ? 1 : 0;
}

struct GmmFitOptions {
    int restarts = 5;
    int max_iterations = 1000;
    double tolerance = 1e-8;  // absolute log-likelihood gain
};

// EM with a k-means++-style seeding (first center uniform, second drawn
// proportionally to squared distance), best of `restarts` by final
// log-likelihood. Component sds are floored at 1e-6 * sd(values). If
// ll_trace is given it receives the per-iteration log-likelihoods of the
// winning restart.
inline Gmm1D fit_gmm2(std::span<const double> values, std::uint64_t seed,
                      const GmmFitOptions& options = {},
                      std::vector<double>* ll_trace = nullptr) {
    const std::size_t n = values.size();
    if (n < 4) throw DegenerateInput("need at least 4 values");
    double mean = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw DegenerateInput("non-finite value");
        mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) throw DegenerateInput("all values equal");
    const double overall_sd = std::sqrt(var);
    const double sd_floor = 1e-6 * overall_sd;

    Gmm1D best;
    double best_ll = -std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < options.restarts; ++restart) {
        auto rng = make_stream(seed, StreamPurpose::gmm_init, static_cast<std::uint64_t>(restart));

        std::size_t first = rng.index(n);
        std::vector<double> sq_dist(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = values[i] - values[first];
            sq_dist[i] = d * d;
            total += sq_dist[i];
        }
        std::size_t second = first;
        if (total > 0.0) {
            for (auto& d : sq_dist) d /= total;
            second = rng.categorical(sq_dist);
        }

        Gmm1D model;
        model.means = {values[first], values[second]};
        model.sds = {overall_sd, overall_sd};
        model.weights = {0.5, 0.5};

        std::vector<double> resp(n);
        double ll = -std::numeric_limits<double>::infinity();
        std::vector<double> trace;
        for (int iter = 0; iter < options.max_iterations; ++iter) {
            // E step
            double new_ll = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                resp[i] = posterior_z(model, values[i]);
                new_ll += model.log_density(values[i]);
            }
            trace.push_back(new_ll);
            if (std::isfinite(ll) && new_ll - ll < options.tolerance) {
                ll = new_ll;
                break;
            }
            ll = new_ll;

            // M step
            double r1 = 0.0;
            for (double r : resp) r1 += r;
            double r0 = static_cast<double>(n) - r1;
            if (r0 < 1e-12 || r1 < 1e-12) break;  // collapsed component
            double m0 = 0.0, m1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                m0 += (1.0 - resp[i]) * values[i];
                m1 += resp[i] * values[i];
            }
            m0 /= r0;
            m1 /= r1;
            double v0 = 0.0, v1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                v0 += (1.0 - resp[i]) * (values[i] - m0) * (values[i] - m0);
                v1 += resp[i] * (values[i] - m1) * (values[i] - m1);
            }
            model.weights = {r0 / static_cast<double>(n), r1 / static_cast<double>(n)};
            model.means = {m0, m1};
            model.sds = {std::max(std::sqrt(v0 / r0), sd_floor), std::max(std::sqrt(v1 / r1), sd_floor)};
        }

        if (ll > best_ll) {
            best_ll = ll;
            best = model;
            if (ll_trace) *ll_trace = trace;
        }
    }

    // Relabeling components does not change likelihoods, so the trace stands.
    if (best.means[0] > best.means[1]) {
        std::swap(best.means[0], best.means[1]);
        std::swap(best.sds[0], best.sds[1]);
        std::swap(best.weights[0], best.weights[1]);
    }
    return best;
}

}  // namespace adsim
