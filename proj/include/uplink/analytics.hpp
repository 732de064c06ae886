#pragma once

// Closed-form spectral-broadening predictions: autocorrelation evolution
// under dispersionless SPM for Gaussian inputs, its M-mode generalization,
// and the Wiener-Khinchin PSD.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uplink/fft.hpp"
#include "uplink/sigkit.hpp"

namespace uplink::analytics {

// Per-mode autocorrelation R(tau) of an M-mode Gaussian signal normalized
// to total unit power, so R(0) = 1/M. Lags are stored in FFT order:
// 0, dt, ..., span/2, -span/2 + dt, ..., -dt.
struct AutocorrelationCurve {
    std::vector<double> lag_s;
    std::vector<sigkit::cplx> values;
    int mode_count = 2;

    double r0() const { return values.empty() ? 0.0 : values[0].real(); }

    void validate() const {
        if (values.size() < 2 || values.size() != lag_s.size())
            throw std::invalid_argument("AutocorrelationCurve: need matching lag/value grids");
        if (mode_count < 1) throw std::invalid_argument("AutocorrelationCurve: mode_count < 1");
        if (std::abs(r0() - 1.0 / mode_count) > 1e-6)
            throw std::invalid_argument("AutocorrelationCurve: R(0) must equal 1/M");
        const std::size_t n = values.size();
        for (std::size_t k = 1; k < n; ++k)
            if (std::abs(values[k] - std::conj(values[n - k])) > 1e-9)
                throw std::invalid_argument("AutocorrelationCurve: Hermitian symmetry violated");
    }
};

// Lag grid matched to a sampled burst: spacing dt = 1/fs, length samples.
inline std::vector<double> fft_ordered_lags(std::size_t count, double dt) {
    std::vector<double> lags(count);
    for (std::size_t k = 0; k < count; ++k)
        lags[k] = dt * static_cast<double>(
                      k <= count / 2 ? static_cast<long long>(k)
                                     : static_cast<long long>(k) - static_cast<long long>(count));
    return lags;
}

// R(0,tau) of a burst of i.i.d. unit-variance symbols shaped by the pulse:
// proportional to the pulse autocorrelation, i.e. the raised-cosine
// impulse response for a root-raised-cosine pulse; normalized to 1/M.
inline AutocorrelationCurve input_autocorrelation_from_pulse(const sigkit::PulseShape& pulse,
                                                             std::size_t count, int n,
                                                             int mode_count = 2) {
    if (count < 2 || n < 1)
        throw std::invalid_argument("input_autocorrelation_from_pulse: bad grid");
    const double dt = pulse.symbol_interval / static_cast<double>(n);
    AutocorrelationCurve c;
    c.mode_count = mode_count;
    c.lag_s = fft_ordered_lags(count, dt);
    c.values.resize(count);
    const double beta = pulse.roll_off;
    const double t_sym = pulse.symbol_interval;
    auto rc_time = [&](double t) {
        const double x = t / t_sym;
        // Raised-cosine impulse response with the removable singularities
        // handled explicitly.
        if (std::abs(x) < 1e-12) return 1.0;
        const double denom = 1.0 - 4.0 * beta * beta * x * x;
        const double sinc = std::sin(M_PI * x) / (M_PI * x);
        if (std::abs(denom) < 1e-9) {
            return (M_PI / 4.0) * std::sin(M_PI / (2.0 * beta)) / (M_PI / (2.0 * beta));
        }
        return sinc * std::cos(M_PI * beta * x) / denom;
    };
    for (std::size_t k = 0; k < count; ++k)
        c.values[k] = rc_time(c.lag_s[k]) / static_cast<double>(mode_count);
    c.validate();
    return c;
}

// M-mode evolution under dispersionless SPM with average phase phi_bar:
// R(L,tau) = R(0,tau) / [1 + phi_bar^2 ((1/M)^2 - |R(0,tau)|^2)]^{M+1}.
inline AutocorrelationCurve evolve_autocorrelation_mmode(const AutocorrelationCurve& in,
                                                         double phi_bar, int mode_count) {
    in.validate();
    if (mode_count != in.mode_count)
        throw std::invalid_argument("evolve_autocorrelation_mmode: mode count mismatch");
    if (phi_bar < 0.0) throw std::invalid_argument("evolve_autocorrelation_mmode: phi_bar < 0");
    const double r0sq = 1.0 / (static_cast<double>(mode_count) * mode_count);
    AutocorrelationCurve out = in;
    for (auto& v : out.values) {
        const double bracket = 1.0 + phi_bar * phi_bar * (r0sq - std::norm(v));
        v /= std::pow(bracket, mode_count + 1);
    }
    return out;
}

// Two-polarization specialization (M = 2, exponent 3, R(0) = 1/2).
inline AutocorrelationCurve evolve_autocorrelation(const AutocorrelationCurve& in, double phi_bar) {
    if (in.mode_count != 2)
        throw std::invalid_argument("evolve_autocorrelation: expects the two-polarization normalization");
    return evolve_autocorrelation_mmode(in, phi_bar, 2);
}

struct AnalyticPsd {
    std::vector<double> freq_hz;  // FFT order, same convention as the lags
    std::vector<double> psd;      // W/Hz per mode
    double bin_hz = 0.0;
    bool negative_excursion = false;  // flagged, never silently clipped

    double total_power() const {
        double acc = 0.0;
        for (double v : psd) acc += v * bin_hz;
        return acc;
    }
};

// Wiener-Khinchin: S(f) = integral R(tau) e^{-j 2 pi f tau} dtau on the
// discrete lag grid. The curve must have decayed at the grid edges.
inline AnalyticPsd psd_from_autocorrelation(const AutocorrelationCurve& in,
                                            double decay_guard = 1e-6) {
    in.validate();
    const std::size_t n = in.values.size();
    const double dt = in.lag_s[1] - in.lag_s[0];
    const double edge = std::abs(in.values[n / 2]);
    if (edge > decay_guard * in.r0())
        throw std::invalid_argument(
            "psd_from_autocorrelation: autocorrelation has not decayed at the lag-grid edge; "
            "enlarge the lag span");
    sigkit::cvec spec = in.values;
    fft::forward(spec);
    AnalyticPsd out;
    out.bin_hz = 1.0 / (dt * static_cast<double>(n));
    out.freq_hz.resize(n);
    out.psd.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.freq_hz[i] = fft::bin_freq(i, n, 1.0 / dt);
        if (std::abs(spec[i].imag()) > 1e-9 * std::abs(spec[i]) + 1e-15)
            throw std::invalid_argument("psd_from_autocorrelation: non-real spectrum");
        out.psd[i] = spec[i].real() * dt;
        peak = std::max(peak, out.psd[i]);
    }
    for (double v : out.psd)
        if (v < -1e-6 * peak) out.negative_excursion = true;
    return out;
}

// Empirical per-polarization autocorrelation of a burst (cyclic), averaged
// over the two polarizations; normalized so R(0) = mean power / 2.
inline AutocorrelationCurve measure_autocorrelation(const sigkit::DualPolSignal& sig) {
    const std::size_t n = sig.size();
    sigkit::cvec sx = sig.x, sy = sig.y;
    fft::forward(sx);
    fft::forward(sy);
    for (auto& v : sx) v = std::norm(v);
    for (auto& v : sy) v = std::norm(v);
    fft::inverse(sx);
    fft::inverse(sy);
    AutocorrelationCurve c;
    c.mode_count = 2;
    c.lag_s = fft_ordered_lags(n, 1.0 / sig.sample_rate);
    c.values.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        c.values[k] = (sx[k] + sy[k]) / (2.0 * static_cast<double>(n));
    return c;
}

}  // namespace uplink::analytics
