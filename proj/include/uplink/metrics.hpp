#pragma once

// Performance estimation: bit-wise GMI with a Gaussian auxiliary channel,
// EVM after data-aided gain removal, and occupied-bandwidth measurement.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "uplink/dsp.hpp"
#include "uplink/sigkit.hpp"

namespace uplink::metrics {

// 2D constellation with priors and per-quadrature Gray bit labels.
struct Constellation {
    std::vector<sigkit::cplx> points;
    std::vector<double> priors;
    std::vector<std::uint32_t> labels;  // bit label per point
    int bits = 0;                       // bits per 2D symbol

    double entropy_bits() const {
        double h = 0.0;
        for (double p : priors)
            if (p > 0.0) h -= p * std::log2(p);
        return h;
    }
};

namespace detail {

inline std::uint32_t gray(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace detail

// Square QAM with `levels_per_dim` equally spaced levels per quadrature
// and an optional per-amplitude distribution over {1, 3, ...} (signs
// uniform). Scaled so the prior-weighted 2D energy equals mean_energy.
inline Constellation qam_constellation(int levels_per_dim,
                                       const std::vector<double>& amp_probs = {},
                                       double mean_energy = 1.0) {
    if (levels_per_dim < 2 || (levels_per_dim & 1) != 0)
        throw std::invalid_argument("qam_constellation: levels per dimension must be even >= 2");
    const int na = levels_per_dim / 2;
    std::vector<double> pa(static_cast<std::size_t>(na), 1.0 / na);
    if (!amp_probs.empty()) {
        if (static_cast<int>(amp_probs.size()) != na)
            throw std::invalid_argument("qam_constellation: amplitude distribution size mismatch");
        double sum = 0.0;
        for (double p : amp_probs) sum += p;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("qam_constellation: amplitude priors must sum to 1");
        pa = amp_probs;
    }
    // Per-dimension levels -L+1 ... -1, 1, ... L-1 (odd), Gray labeled on
    // the ascending order; P(level) = P(|level|)/2.
    std::vector<double> lev(static_cast<std::size_t>(levels_per_dim)), pl(lev.size());
    for (int i = 0; i < levels_per_dim; ++i) {
        lev[static_cast<std::size_t>(i)] = 2.0 * i - levels_per_dim + 1.0;
        const int amp = std::abs(2 * i - levels_per_dim + 1) / 2;
        pl[static_cast<std::size_t>(i)] = pa[static_cast<std::size_t>(amp)] / 2.0;
    }
    const int bits_per_dim = static_cast<int>(std::lround(std::log2(levels_per_dim)));
    Constellation c;
    c.bits = 2 * bits_per_dim;
    double e = 0.0;
    for (int i = 0; i < levels_per_dim; ++i)
        for (int q = 0; q < levels_per_dim; ++q) {
            c.points.emplace_back(lev[static_cast<std::size_t>(i)], lev[static_cast<std::size_t>(q)]);
            const double p = pl[static_cast<std::size_t>(i)] * pl[static_cast<std::size_t>(q)];
            c.priors.push_back(p);
            c.labels.push_back((detail::gray(static_cast<std::uint32_t>(i)) << bits_per_dim) |
                               detail::gray(static_cast<std::uint32_t>(q)));
            e += p * std::norm(c.points.back());
        }
    const double scale = std::sqrt(mean_energy / e);
    for (auto& s : c.points) s *= scale;
    return c;
}

// Nearest-point indices after matching the constellation's prior-weighted
// power to the empirical power of the sequence.
inline std::vector<int> nearest_indices(const sigkit::cvec& symbols, const Constellation& c) {
    double emp = 0.0, ref = 0.0;
    for (const auto& s : symbols) emp += std::norm(s);
    emp /= static_cast<double>(symbols.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) ref += c.priors[i] * std::norm(c.points[i]);
    const double scale = std::sqrt(emp / ref);
    std::vector<int> idx(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            const double d = std::norm(symbols[k] - scale * c.points[i]);
            if (d < best) {
                best = d;
                idx[k] = static_cast<int>(i);
            }
        }
    }
    return idx;
}

struct GmiEstimate {
    double gmi_bits_per_2d = 0.0;
    double entropy_bits = 0.0;       // H(X) from the realized tx frequencies
    double noise_variance = 0.0;     // fitted auxiliary-channel variance
    double confidence_half_width = 0.0;  // bits, from batch means
    std::size_t symbol_count = 0;
    bool low_sample_warning = false;
};

struct GmiOptions {
    int batches = 16;
    int variance_search_iters = 48;
    double variance_span_decades = 2.0;
    // The rate is stationary in the auxiliary variance at its maximum, so the
    // search can run on a deterministic subsample with negligible bias; the
    // reported rate always comes from a full pass at the fitted variance.
    std::size_t max_search_samples = 16384;
};

// Achievable rate for bit-wise decoding: GMI = H(X) - sum_j H(B_j | Y),
// with bit posteriors computed through a circularly symmetric Gaussian
// auxiliary channel whose variance maximizes the rate (the standard
// mismatched-decoding lower bound for this metric family).
inline GmiEstimate gmi_estimate(const std::vector<int>& tx_indices, const sigkit::cvec& rx,
                                const Constellation& c, const GmiOptions& opts = {}) {
    const std::size_t count = tx_indices.size();
    if (count == 0 || count != rx.size())
        throw std::invalid_argument("gmi_estimate: aligned nonempty sequences required");
    double psum = 0.0;
    for (double p : c.priors) psum += p;
    if (std::abs(psum - 1.0) > 1e-9)
        throw std::invalid_argument("gmi_estimate: priors must sum to 1");
    const std::size_t m = c.points.size();

    // H(X) from the realized empirical frequencies.
    std::vector<double> freq(m, 0.0);
    for (int i : tx_indices) {
        if (i < 0 || static_cast<std::size_t>(i) >= m)
            throw std::invalid_argument("gmi_estimate: tx index out of range");
        freq[static_cast<std::size_t>(i)] += 1.0 / static_cast<double>(count);
    }
    double hx = 0.0;
    for (double p : freq)
        if (p > 0.0) hx -= p * std::log2(p);

    // The constellation is expected in data units (the frame overload
    // rescales before indexing; rx is gain-fitted upstream).
    const std::vector<sigkit::cplx>& pts = c.points;

    // Error variance seeds the search bracket.
    double err = 0.0;
    for (std::size_t k = 0; k < count; ++k)
        err += std::norm(rx[k] - pts[static_cast<std::size_t>(tx_indices[k])]);
    err /= static_cast<double>(count);
    if (!std::isfinite(err)) throw std::invalid_argument("gmi_estimate: degenerate variance fit");
    const double sigma0 = std::max(err, 1e-30);

    // Sum over points of prior * exp(-d/s2) split by the value of each bit,
    // evaluated per received sample; returns the per-sample bitwise
    // information sum_j log2 P(b_jk | y_k).
    auto sample_info = [&](std::size_t k, double s2) {
        double dmin = std::numeric_limits<double>::infinity();
        thread_local std::vector<double> d;
        d.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            d[i] = std::norm(rx[k] - pts[i]);
            dmin = std::min(dmin, d[i]);
        }
        const std::uint32_t txlabel = c.labels[static_cast<std::size_t>(tx_indices[k])];
        double info = 0.0;
        for (int j = 0; j < c.bits; ++j) {
            double num = 0.0, den = 0.0;
            const std::uint32_t mask = 1u << j;
            for (std::size_t i = 0; i < m; ++i) {
                const double w = c.priors[i] * std::exp(-(d[i] - dmin) / s2);
                den += w;
                if (((c.labels[i] ^ txlabel) & mask) == 0) num += w;
            }
            info += std::log2(std::max(num, 1e-300) / den);
        }
        return info;
    };
    const std::size_t stride =
        std::max<std::size_t>(1, count / std::max<std::size_t>(1, opts.max_search_samples));
    auto rate_for = [&](double s2) {
        double acc = 0.0;
        std::size_t used = 0;
        for (std::size_t k = 0; k < count; k += stride, ++used) acc += sample_info(k, s2);
        return hx + acc / static_cast<double>(used);
    };

    // Golden-section maximization over log10 variance.
    const double span = opts.variance_span_decades;
    double lo = std::log10(sigma0) - span, hi = std::log10(sigma0) + span;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = rate_for(std::pow(10.0, x1)), f2 = rate_for(std::pow(10.0, x2));
    for (int it = 0; it < opts.variance_search_iters && hi - lo > 1e-2; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = rate_for(std::pow(10.0, x2));
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = rate_for(std::pow(10.0, x1));
        }
    }
    const double s2 = std::pow(10.0, 0.5 * (lo + hi));

    // Final pass at the fitted variance, with batch means for confidence.
    const int nb = std::max(2, opts.batches);
    std::vector<double> batch(static_cast<std::size_t>(nb), 0.0);
    std::vector<std::size_t> bcount(static_cast<std::size_t>(nb), 0);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t b = k * static_cast<std::size_t>(nb) / count;
        batch[b] += sample_info(k, s2);
        bcount[b]++;
    }
    double mean = 0.0;
    for (int b = 0; b < nb; ++b) {
        batch[static_cast<std::size_t>(b)] /= static_cast<double>(bcount[static_cast<std::size_t>(b)]);
        mean += batch[static_cast<std::size_t>(b)] / nb;
    }
    double var = 0.0;
    for (int b = 0; b < nb; ++b) {
        const double dev = batch[static_cast<std::size_t>(b)] - mean;
        var += dev * dev / (nb - 1);
    }

    GmiEstimate out;
    out.entropy_bits = hx;
    out.noise_variance = s2;
    out.symbol_count = count;
    out.gmi_bits_per_2d = std::clamp(hx + mean, 0.0, hx);
    out.confidence_half_width = 1.96 * std::sqrt(var / nb);
    if (count < 1000) {
        out.low_sample_warning = true;
        out.confidence_half_width *= 3.0;
    }
    return out;
}

// Convenience: estimate over a dual-polarization frame pair, treating the
// two polarizations as independent 2D channel uses.
inline GmiEstimate gmi_estimate(const sigkit::SymbolFrame& tx, const sigkit::SymbolFrame& rx,
                                const Constellation& c, const GmiOptions& opts = {}) {
    if (tx.size() != rx.size() || tx.empty())
        throw std::invalid_argument("gmi_estimate: aligned nonempty frames required");
    sigkit::cvec txs, rxs;
    txs.reserve(2 * tx.size());
    rxs.reserve(2 * tx.size());
    txs.insert(txs.end(), tx.x.begin(), tx.x.end());
    txs.insert(txs.end(), tx.y.begin(), tx.y.end());
    rxs.insert(rxs.end(), rx.x.begin(), rx.x.end());
    rxs.insert(rxs.end(), rx.y.begin(), rx.y.end());
    // Index tx symbols and rescale the constellation onto the tx scale so
    // distances are computed in data units.
    Constellation scaled = c;
    double emp = 0.0, ref = 0.0;
    for (const auto& s : txs) emp += std::norm(s);
    emp /= static_cast<double>(txs.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) ref += c.priors[i] * std::norm(c.points[i]);
    const double scale = std::sqrt(emp / ref);
    for (auto& s : scaled.points) s *= scale;
    std::vector<int> idx(txs.size());
    for (std::size_t k = 0; k < txs.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < scaled.points.size(); ++i) {
            const double d = std::norm(txs[k] - scaled.points[i]);
            if (d < best) {
                best = d;
                idx[k] = static_cast<int>(i);
            }
        }
    }
    return gmi_estimate(idx, rxs, scaled, opts);
}

// ---------------------------------------------------------------------------

// Error-vector magnitude in dB after a data-aided complex gain fit;
// floored at -150 dB.
inline double evm_db(const sigkit::SymbolFrame& tx, const sigkit::SymbolFrame& rx) {
    if (tx.empty() || tx.size() != rx.size())
        throw std::invalid_argument("evm_db: aligned nonempty frames required");
    const sigkit::cplx g = dsp::complex_gain_fit(tx, rx);
    double err = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < tx.size(); ++k) {
        err += std::norm(rx.x[k] / g - tx.x[k]) + std::norm(rx.y[k] / g - tx.y[k]);
        ref += std::norm(tx.x[k]) + std::norm(tx.y[k]);
    }
    if (err <= 0.0) return -150.0;
    return std::max(10.0 * std::log10(err / ref), -150.0);
}

// Width of the smallest symmetric band containing every PSD bin above
// (peak - threshold_db), from a full-burst periodogram of both
// polarizations combined.
inline double occupied_bandwidth(const sigkit::DualPolSignal& signal, double threshold_db) {
    auto psd = sigkit::estimate_psd(signal, signal.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i)
        peak = std::max(peak, psd.psd_x[i] + psd.psd_y[i]);
    if (peak <= 0.0) throw std::invalid_argument("occupied_bandwidth: degenerate spectrum");
    const double floor_level = peak * std::pow(10.0, -threshold_db / 10.0);
    double w = 0.0;
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i)
        if (psd.psd_x[i] + psd.psd_y[i] >= floor_level) w = std::max(w, std::abs(psd.freq_hz[i]));
    return 2.0 * w;
}

}  // namespace uplink::metrics
