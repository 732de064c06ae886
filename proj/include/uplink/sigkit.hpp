#pragma once

// Dual-polarization sampled signals, RRC pulse shaping, ideal rectangular
// filters and empirical PSD estimation. All operations are pure; signals
// are treated as values.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "uplink/fft.hpp"

namespace uplink::sigkit {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

// Sampled normalized dual-polarization complex envelope. avg_power is the
// physical power P multiplying the normalized envelope; the samples are
// kept normalized so that E{|u_x|^2 + |u_y|^2} ~ 1 for random data.
struct DualPolSignal {
    cvec x;
    cvec y;
    double sample_rate = 0.0;  // Hz
    double avg_power = 0.0;    // W

    DualPolSignal() = default;
    DualPolSignal(cvec sx, cvec sy, double fs, double power)
        : x(std::move(sx)), y(std::move(sy)), sample_rate(fs), avg_power(power) {
        if (x.empty() || x.size() != y.size())
            throw std::invalid_argument("DualPolSignal: polarizations must have equal nonzero length");
        if (sample_rate <= 0.0) throw std::invalid_argument("DualPolSignal: sample_rate must be > 0");
        if (avg_power <= 0.0) throw std::invalid_argument("DualPolSignal: avg_power must be > 0");
    }

    std::size_t size() const { return x.size(); }

    // Mean of |u_x|^2 + |u_y|^2 over the burst.
    double mean_norm_power() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += std::norm(x[i]) + std::norm(y[i]);
        return acc / static_cast<double>(x.size());
    }
};

// One 4D symbol: complex entries for the two polarizations.
struct SymbolFrame {
    cvec x;  // a_{k,x}
    cvec y;  // a_{k,y}

    std::size_t size() const { return x.size(); }
    bool empty() const { return x.empty(); }
};

// Root-raised-cosine pulse. Synthesis happens in the frequency domain on
// the cyclic burst grid (sqrt of the sampled raised-cosine power spectrum),
// so the matched-filter cascade is exactly Nyquist on that grid and the
// pulse has zero group delay. truncation_span sizes the cyclic guard that
// bursts carry to hide wraparound.
struct PulseShape {
    double roll_off = 0.05;
    double symbol_interval = 0.0;  // T = 1/R, seconds
    int truncation_span = 64;      // symbols

    PulseShape(double rolloff, double T, int span = 64)
        : roll_off(rolloff), symbol_interval(T), truncation_span(span) {
        if (roll_off < 0.0 || roll_off > 1.0) throw std::invalid_argument("PulseShape: roll_off in [0,1]");
        if (symbol_interval <= 0.0) throw std::invalid_argument("PulseShape: symbol_interval must be > 0");
        if (truncation_span < 2) throw std::invalid_argument("PulseShape: truncation_span too small");
    }

    // RRC impulse response, unit continuous-time energy.
    double value(double t) const {
        const double T = symbol_interval;
        const double b = roll_off;
        const double x = t / T;
        const double pi = std::numbers::pi;
        double v;
        if (std::abs(x) < 1e-10) {
            v = 1.0 + b * (4.0 / pi - 1.0);
        } else if (b > 0.0 && std::abs(std::abs(x) - 1.0 / (4.0 * b)) < 1e-8) {
            v = b / std::numbers::sqrt2 *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) +
                 (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        } else {
            const double num = std::sin(pi * x * (1.0 - b)) +
                               4.0 * b * x * std::cos(pi * x * (1.0 + b));
            const double den = pi * x * (1.0 - (4.0 * b * x) * (4.0 * b * x));
            v = num / den;
        }
        return v / std::sqrt(T);
    }

    // Raised-cosine power spectrum (unit height, baud 1/T): |P(f)|^2 up to
    // scale. Satisfies the Nyquist folding sum exactly.
    double rc_power_spectrum(double f) const {
        const double b = roll_off;
        const double af = std::abs(f) * symbol_interval;
        if (af <= (1.0 - b) / 2.0) return 1.0;
        if (af >= (1.0 + b) / 2.0) return 0.0;
        const double c =
            std::cos(std::numbers::pi / (2.0 * b) * (af - (1.0 - b) / 2.0));
        return c * c;
    }
};

// Ideal lowpass: |H(f)| = 1 for |f| <= B, 0 otherwise, on the DFT grid.
struct BrickwallFilter {
    double lowpass_bandwidth;  // one-sided B, Hz

    explicit BrickwallFilter(double b) : lowpass_bandwidth(b) {
        if (b <= 0.0) throw std::invalid_argument("BrickwallFilter: bandwidth must be > 0");
    }
};

namespace detail {

// sqrt-RC transfer values on the DFT grid of a len-sample burst at n
// samples/symbol, scaled by `gain`.
inline std::vector<double> rrc_transfer(const PulseShape& pulse, std::size_t len, int n,
                                        double gain) {
    const double fs = static_cast<double>(n) / pulse.symbol_interval;
    std::vector<double> h(len);
    for (std::size_t i = 0; i < len; ++i)
        h[i] = gain * std::sqrt(pulse.rc_power_spectrum(fft::bin_freq(i, len, fs)));
    return h;
}

inline void apply_real_transfer(cvec& sig, const std::vector<double>& h) {
    fft::forward(sig);
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] *= h[i];
    fft::inverse(sig);
}

}  // namespace detail

// x(t) = sum_k a_k p(t - kT), sampled at n/T. Linear in the symbols;
// symbol k maps to sample k*n. With unit-mean-energy 4D symbols the
// output satisfies E{||u||^2} = 1 exactly (discrete Nyquist folding).
inline DualPolSignal modulate(const SymbolFrame& frame, const PulseShape& pulse, int n,
                              double avg_power = 1.0) {
    if (n < 1) throw std::invalid_argument("modulate: n must be >= 1");
    if (frame.empty()) throw std::invalid_argument("modulate: empty frame");
    const std::size_t len = frame.size() * static_cast<std::size_t>(n);
    const auto h = detail::rrc_transfer(pulse, len, n, static_cast<double>(n));
    cvec ux(len, 0.0), uy(len, 0.0);
    for (std::size_t k = 0; k < frame.size(); ++k) {
        ux[k * n] = frame.x[k];
        uy[k * n] = frame.y[k];
    }
    detail::apply_real_transfer(ux, h);
    detail::apply_real_transfer(uy, h);
    return DualPolSignal(std::move(ux), std::move(uy), static_cast<double>(n) / pulse.symbol_interval,
                         avg_power);
}

// Zero all DFT bins with |f| > B. Never increases power; idempotent up to
// floating-point roundoff of the transform pair.
inline DualPolSignal apply_brickwall(const DualPolSignal& sig, const BrickwallFilter& filt) {
    if (sig.size() < 2) throw std::invalid_argument("apply_brickwall: signal too short");
    const std::size_t len = sig.size();
    DualPolSignal out = sig;
    for (cvec* pol : {&out.x, &out.y}) {
        fft::forward(*pol);
        for (std::size_t i = 0; i < len; ++i) {
            if (std::abs(fft::bin_freq(i, len, sig.sample_rate)) > filt.lowpass_bandwidth)
                (*pol)[i] = 0.0;
        }
        fft::inverse(*pol);
    }
    return out;
}

// Matched filter (time-reversed conjugate pulse) and symbol-rate sampling
// at kT. Gain normalized so the noiseless modulate -> matched_filter loop
// is the identity on symbols.
inline SymbolFrame matched_filter_and_sample(const DualPolSignal& sig, const PulseShape& pulse,
                                             int n) {
    if (n < 1) throw std::invalid_argument("matched_filter_and_sample: n must be >= 1");
    if (sig.size() % static_cast<std::size_t>(n) != 0)
        throw std::invalid_argument("matched_filter_and_sample: length not a multiple of n");
    // Cascade with the unit-gain mf transfer is n * RC(f); the folding sum
    // at symbol-rate sampling is exactly 1, so the noiseless loop is the
    // identity on symbols.
    const auto h = detail::rrc_transfer(pulse, sig.size(), n, 1.0);
    const std::size_t nsym = sig.size() / static_cast<std::size_t>(n);
    cvec fx = sig.x, fy = sig.y;
    detail::apply_real_transfer(fx, h);
    detail::apply_real_transfer(fy, h);
    SymbolFrame out;
    out.x.resize(nsym);
    out.y.resize(nsym);
    for (std::size_t k = 0; k < nsym; ++k) {
        out.x[k] = fx[k * n];
        out.y[k] = fy[k * n];
    }
    return out;
}

// One-sided PSD sample grid (DFT order: bin i at fft::bin_freq(i, ...)).
struct PsdEstimate {
    std::vector<double> freq_hz;  // DFT-ordered
    std::vector<double> psd_x;    // 1/Hz (normalized-envelope power density)
    std::vector<double> psd_y;
    double bin_hz = 0.0;

    double total_power() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < psd_x.size(); ++i) acc += psd_x[i] + psd_y[i];
        return acc * bin_hz;
    }
};

// Averaged periodogram over non-overlapping rectangular-window segments.
// Integral of the estimate over f equals the mean signal power.
inline PsdEstimate estimate_psd(const DualPolSignal& sig, std::size_t segment_len) {
    if (segment_len < 8) throw std::invalid_argument("estimate_psd: segment_len must be >= 8");
    if (segment_len > sig.size()) throw std::invalid_argument("estimate_psd: segment longer than signal");
    const std::size_t nseg = sig.size() / segment_len;
    PsdEstimate out;
    out.bin_hz = sig.sample_rate / static_cast<double>(segment_len);
    out.freq_hz.resize(segment_len);
    out.psd_x.assign(segment_len, 0.0);
    out.psd_y.assign(segment_len, 0.0);
    for (std::size_t i = 0; i < segment_len; ++i)
        out.freq_hz[i] = fft::bin_freq(i, segment_len, sig.sample_rate);
    cvec seg(segment_len);
    const double scale = 1.0 / (static_cast<double>(segment_len) * sig.sample_rate *
                                static_cast<double>(nseg));
    for (std::size_t s = 0; s < nseg; ++s) {
        std::copy_n(sig.x.begin() + static_cast<long>(s * segment_len), segment_len, seg.begin());
        fft::forward(seg);
        for (std::size_t i = 0; i < segment_len; ++i) out.psd_x[i] += std::norm(seg[i]) * scale;
        std::copy_n(sig.y.begin() + static_cast<long>(s * segment_len), segment_len, seg.begin());
        fft::forward(seg);
        for (std::size_t i = 0; i < segment_len; ++i) out.psd_y[i] += std::norm(seg[i]) * scale;
    }
    return out;
}

// Accumulate PSDs across independent bursts (same grid).
inline void accumulate_psd(PsdEstimate& acc, const PsdEstimate& one, std::size_t count) {
    if (acc.psd_x.empty()) {
        acc = one;
        for (auto& v : acc.psd_x) v /= static_cast<double>(count);
        for (auto& v : acc.psd_y) v /= static_cast<double>(count);
        return;
    }
    if (acc.psd_x.size() != one.psd_x.size())
        throw std::invalid_argument("accumulate_psd: grid mismatch");
    for (std::size_t i = 0; i < one.psd_x.size(); ++i) {
        acc.psd_x[i] += one.psd_x[i] / static_cast<double>(count);
        acc.psd_y[i] += one.psd_y[i] / static_cast<double>(count);
    }
}

// L_D = T0^2 / |beta2|; beta2 = 0 reported as +infinity.
inline double dispersion_length(double t0_s, double beta2_s2_per_m) {
    if (t0_s <= 0.0) throw std::invalid_argument("dispersion_length: T0 must be > 0");
    if (beta2_s2_per_m == 0.0) return std::numeric_limits<double>::infinity();
    return t0_s * t0_s / std::abs(beta2_s2_per_m);
}

// Binary signal export: little-endian interleaved 64-bit floats
// (re_x, im_x, re_y, im_y per sample) plus a JSON sidecar at <path>.json
// carrying sample_rate and avg_power. Assumes a little-endian host.
inline void write_signal(const DualPolSignal& sig, const std::string& path) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("write_signal: cannot open " + path);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const double rec[4] = {sig.x[i].real(), sig.x[i].imag(), sig.y[i].real(),
                               sig.y[i].imag()};
        bin.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
    if (!bin) throw std::runtime_error("write_signal: short write to " + path);
    std::ofstream meta(path + ".json");
    if (!meta) throw std::runtime_error("write_signal: cannot open " + path + ".json");
    meta.precision(17);
    meta << "{\"sample_rate\": " << sig.sample_rate << ", \"avg_power\": " << sig.avg_power
         << ", \"samples\": " << sig.size() << "}\n";
}

inline DualPolSignal read_signal(const std::string& path, double sample_rate,
                                 double avg_power) {
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("read_signal: cannot open " + path);
    cvec sx, sy;
    double rec[4];
    while (bin.read(reinterpret_cast<char*>(rec), sizeof(rec))) {
        sx.emplace_back(rec[0], rec[1]);
        sy.emplace_back(rec[2], rec[3]);
    }
    if (bin.gcount() != 0) throw std::runtime_error("read_signal: truncated record in " + path);
    return DualPolSignal(std::move(sx), std::move(sy), sample_rate, avg_power);
}

}  // namespace uplink::sigkit
