#pragma once

// Independent AWGN bit-wise rate oracle: Gauss-Hermite quadrature plus a
// direct Monte-Carlo channel use. Test-only.

#include <random>
#include <vector>

#include "test_helpers.hpp"
#include "uplink/metrics.hpp"
#include "uplink/sigkit.hpp"

namespace testutil {

// Gauss-Hermite nodes/weights for weight e^{-x^2} (Newton iteration on the
// Hermite recurrence).
inline void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(n, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[static_cast<std::size_t>(i - 2)];
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = std::pow(M_PI, -0.25), p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-14) break;
        }
        x[static_cast<std::size_t>(i)] = z;
        x[static_cast<std::size_t>(n - 1 - i)] = -z;
        w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
}

// Bit-wise achievable rate over AWGN with the matched Gaussian metric,
// by 2D Gauss-Hermite quadrature.
inline double awgn_bitwise_rate(const uplink::metrics::Constellation& c, double snr_db,
                                int nodes = 24) {
    using uplink::sigkit::cplx;
    std::vector<double> x, w;
    gauss_hermite(nodes, x, w);
    double es = 0.0;
    for (std::size_t i = 0; i < c.points.size(); ++i) es += c.priors[i] * std::norm(c.points[i]);
    const double s2 = es * std::pow(10.0, -snr_db / 10.0);
    const double sigma = std::sqrt(s2);
    double acc = 0.0;
    for (std::size_t s = 0; s < c.points.size(); ++s) {
        if (c.priors[s] == 0.0) continue;
        double inner = 0.0;
        for (int a = 0; a < nodes; ++a)
            for (int b = 0; b < nodes; ++b) {
                const cplx y = c.points[s] + sigma * cplx(x[a], x[b]);
                double info = 0.0;
                for (int j = 0; j < c.bits; ++j) {
                    double num = 0.0, den = 0.0;
                    const std::uint32_t mask = 1u << j;
                    for (std::size_t i = 0; i < c.points.size(); ++i) {
                        const double lik = c.priors[i] * std::exp(-std::norm(y - c.points[i]) / s2);
                        den += lik;
                        if (((c.labels[i] ^ c.labels[s]) & mask) == 0) num += lik;
                    }
                    info += std::log2(num / den);
                }
                inner += w[a] * w[b] / M_PI * info;
            }
        acc += c.priors[s] * inner;
    }
    return c.entropy_bits() + acc;
}

// AWGN channel use at a given SNR: draws tx indices i.i.d. from the priors.
inline uplink::metrics::GmiEstimate simulate_awgn_gmi(const uplink::metrics::Constellation& c,
                                                      double snr_db, std::size_t count,
                                                      std::uint64_t seed) {
    using uplink::sigkit::cplx;
    auto g = rng(seed);
    std::discrete_distribution<int> pick(c.priors.begin(), c.priors.end());
    double es = 0.0;
    for (std::size_t i = 0; i < c.points.size(); ++i) es += c.priors[i] * std::norm(c.points[i]);
    const double sigma_q = std::sqrt(es * std::pow(10.0, -snr_db / 10.0) / 2.0);
    std::normal_distribution<double> noise(0.0, sigma_q);
    std::vector<int> idx(count);
    uplink::sigkit::cvec rx(count);
    for (std::size_t k = 0; k < count; ++k) {
        idx[k] = pick(g);
        rx[k] = c.points[static_cast<std::size_t>(idx[k])] + cplx(noise(g), noise(g));
    }
    return uplink::metrics::gmi_estimate(idx, rx, c);
}

}  // namespace testutil
