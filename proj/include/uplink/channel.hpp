#pragma once

// Fiber/HPOA propagation: characteristic nonlinear power from the
// longitudinal power profile, closed-form zero-dispersion SPM, full
// split-step Manakov integration, receiver-noise injection from the link
// budget, and the simplified (dispersionless + AWGN) end-to-end model.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "uplink/fft.hpp"
#include "uplink/sigkit.hpp"
#include "uplink/units.hpp"

namespace uplink::channel {

// One fiber span with its normalized longitudinal power profile g(z),
// tabulated on a uniform z-grid and normalized so g(L) = 1: power along
// the span is P * g(z) with P the span output power.
struct FiberSegmentProfile {
    double length = 0.0;        // m
    double gamma = 0.0;         // 1/(W m)
    double beta2 = 0.0;         // s^2/m
    double attenuation = 0.0;   // nepers/m
    bool is_active = false;
    double gain = 1.0;          // linear, active spans only
    double noise_figure = 1.0;  // linear, active spans only
    std::vector<double> z_grid;  // uniform, z_grid.front() = 0, back() = length
    std::vector<double> g_grid;  // g at the grid nodes

    void validate() const {
        if (length <= 0.0) throw std::invalid_argument("FiberSegmentProfile: length must be > 0");
        if (z_grid.size() < 2 || z_grid.size() != g_grid.size())
            throw std::invalid_argument("FiberSegmentProfile: profile grid too short");
        if (std::abs(g_grid.back() - 1.0) > 1e-9)
            throw std::invalid_argument("FiberSegmentProfile: g(L) must equal 1");
        for (double g : g_grid)
            if (g <= 0.0) throw std::invalid_argument("FiberSegmentProfile: g(z) must be > 0");
    }

    // Trapezoidal integral of g over [0, z] at the grid nodes, linearly
    // interpolated between them.
    double profile_integral(double z) const {
        const double dz = length / static_cast<double>(z_grid.size() - 1);
        z = std::min(std::max(z, 0.0), length);
        const double pos = z / dz;
        const std::size_t i = std::min(static_cast<std::size_t>(pos), z_grid.size() - 2);
        double acc = 0.0;
        for (std::size_t j = 0; j < i; ++j) acc += 0.5 * (g_grid[j] + g_grid[j + 1]) * dz;
        const double frac = pos - static_cast<double>(i);
        const double gmid = g_grid[i] + (g_grid[i + 1] - g_grid[i]) * frac;
        acc += 0.5 * (g_grid[i] + gmid) * frac * dz;
        return acc;
    }
    double profile_integral() const { return profile_integral(length); }
};

namespace detail {

inline std::vector<double> uniform_grid(double length, std::size_t points) {
    std::vector<double> z(points);
    for (std::size_t i = 0; i < points; ++i)
        z[i] = length * static_cast<double>(i) / static_cast<double>(points - 1);
    return z;
}

}  // namespace detail

// Passive span: g(z) = e^{alpha (L - z)}, referenced to the span output.
inline FiberSegmentProfile passive_segment(double length_m, double gamma_per_w_km,
                                           double alpha_db_km, double beta2_s2_m = 0.0,
                                           std::size_t grid_points = 4097) {
    FiberSegmentProfile s;
    s.length = length_m;
    s.gamma = units::gamma_per_w_m(gamma_per_w_km);
    s.beta2 = beta2_s2_m;
    s.attenuation = units::attenuation_per_m(alpha_db_km);
    s.z_grid = detail::uniform_grid(length_m, grid_points);
    s.g_grid.resize(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        s.g_grid[i] = std::exp(s.attenuation * (length_m - s.z_grid[i]));
    s.validate();
    return s;
}

// Active span with exponential gain profile g(z) = e^{g0 (z - L)}, where
// the net gain is G = e^{g0 L}.
inline FiberSegmentProfile active_segment(double length_m, double gamma_per_w_km,
                                          double alpha_db_km, double d_ps_nm_km,
                                          double gain_linear, double nf_linear,
                                          std::size_t grid_points = 4097) {
    if (gain_linear <= 1.0)
        throw std::invalid_argument("active_segment: gain must exceed 1 (linear)");
    FiberSegmentProfile s;
    s.length = length_m;
    s.gamma = units::gamma_per_w_m(gamma_per_w_km);
    s.beta2 = units::beta2_from_dispersion(d_ps_nm_km);
    s.attenuation = units::attenuation_per_m(alpha_db_km);
    s.is_active = true;
    s.gain = gain_linear;
    s.noise_figure = nf_linear;
    const double g0 = std::log(gain_linear) / length_m;
    s.z_grid = detail::uniform_grid(length_m, grid_points);
    s.g_grid.resize(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        s.g_grid[i] = std::exp(g0 * (s.z_grid[i] - length_m));
    s.validate();
    return s;
}

// P_NL = 1 / sum_spans integral gamma g(z) dz; the power at which the
// average accumulated nonlinear phase is 1 rad.
inline double characteristic_nonlinear_power(const std::vector<FiberSegmentProfile>& segments) {
    double acc = 0.0;
    for (const auto& s : segments) {
        s.validate();
        acc += s.gamma * s.profile_integral();
    }
    if (acc <= 0.0)
        throw std::invalid_argument("characteristic_nonlinear_power: zero profile integral");
    return 1.0 / acc;
}

// Average nonlinear phase rotation at launch power P.
inline double average_nonlinear_phase(const std::vector<FiberSegmentProfile>& segments, double p_watt) {
    return p_watt / characteristic_nonlinear_power(segments);
}

// Default amplifier chain: 30 m active fiber followed by a 3 m passive
// pigtail, with the active gain calibrated so the chain's P_NL hits the
// requested target. The calibrated gain is an output, not an input.
struct HpoaLink {
    std::vector<FiberSegmentProfile> segments;
    double gain_db = 0.0;
    double p_nl_watt = 0.0;
};

inline HpoaLink calibrated_hpoa_link(double target_pnl_dbm = 42.7, double nf_db = 5.0) {
    const double target = units::dbm_to_watt(target_pnl_dbm);
    auto build = [&](double gain_db) {
        std::vector<FiberSegmentProfile> seg;
        seg.push_back(active_segment(30.0, 3.6, 0.2, 17.0, units::db_to_linear(gain_db),
                                     units::db_to_linear(nf_db)));
        seg.push_back(passive_segment(3.0, 1.27, 0.2, units::beta2_si(-21.7)));
        return seg;
    };
    // P_NL grows monotonically with gain (larger g0 concentrates the power
    // near the output), so bisection on gain_db brackets the target.
    double lo = 0.1, hi = 80.0;
    if (characteristic_nonlinear_power(build(lo)) > target ||
        characteristic_nonlinear_power(build(hi)) < target)
        throw std::invalid_argument("calibrated_hpoa_link: target P_NL outside calibration range");
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (characteristic_nonlinear_power(build(mid)) < target)
            lo = mid;
        else
            hi = mid;
    }
    HpoaLink link;
    link.gain_db = 0.5 * (lo + hi);
    link.segments = build(link.gain_db);
    link.p_nl_watt = characteristic_nonlinear_power(link.segments);
    return link;
}

// ---------------------------------------------------------------------------
// Zero-dispersion SPM closed form: u(L,t) = u(0,t) exp(-j phi_bar |u|^2),
// the same rotation on both polarizations; magnitudes preserved exactly.

inline sigkit::DualPolSignal zero_dispersion_propagate(const sigkit::DualPolSignal& in,
                                                       double phi_bar) {
    if (phi_bar < 0.0) throw std::invalid_argument("zero_dispersion_propagate: phi_bar < 0");
    sigkit::DualPolSignal out = in;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double p = std::norm(out.x[i]) + std::norm(out.y[i]);
        const sigkit::cplx rot = std::polar(1.0, -phi_bar * p);
        out.x[i] *= rot;
        out.y[i] *= rot;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Split-step Manakov integration.

struct SsfmSettings {
    double max_phase_per_step = 0.01;  // rad, at P * max|u|^2
    int min_steps_per_segment = 4;
    bool include_ase = false;
    bool distributed_ase = false;  // otherwise lumped at the amplifier output
    double photon_energy = units::photon_energy();
    std::size_t max_steps_per_segment = 2000000;
};

namespace detail {

inline void dispersion_step(sigkit::cvec& u, double beta2, double h, double fs) {
    // In frequency: each component picks up exp(-j beta2 w^2 h / 2).
    const std::size_t len = u.size();
    fft::forward(u);
    for (std::size_t i = 0; i < len; ++i) {
        const double w = 2.0 * M_PI * fft::bin_freq(i, len, fs);
        u[i] *= std::polar(1.0, -0.5 * beta2 * w * w * h);
    }
    fft::inverse(u);
}

inline void add_circular_noise(sigkit::cvec& u, double var_per_component, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(var_per_component));
    for (auto& s : u) s += sigkit::cplx(gauss(rng), gauss(rng));
}

}  // namespace detail

inline sigkit::DualPolSignal ssfm_propagate(const sigkit::DualPolSignal& in,
                                            const std::vector<FiberSegmentProfile>& segments,
                                            double p_watt, const SsfmSettings& settings,
                                            std::mt19937_64* rng = nullptr) {
    if (p_watt <= 0.0) throw std::invalid_argument("ssfm_propagate: launch power must be > 0");
    if (settings.include_ase && rng == nullptr)
        throw std::invalid_argument("ssfm_propagate: ASE requested without an RNG");
    sigkit::DualPolSignal out = in;
    const std::size_t len = out.size();
    for (const auto& seg : segments) {
        seg.validate();
        double umax2 = 0.0;
        for (std::size_t i = 0; i < len; ++i)
            umax2 = std::max(umax2, std::norm(out.x[i]) + std::norm(out.y[i]));
        double gmax = 0.0;
        for (double g : seg.g_grid) gmax = std::max(gmax, g);
        const double worst_phase = seg.gamma * p_watt * umax2 * gmax * seg.length;
        std::size_t steps = static_cast<std::size_t>(
            std::ceil(worst_phase / settings.max_phase_per_step));
        steps = std::max<std::size_t>(steps, static_cast<std::size_t>(settings.min_steps_per_segment));
        if (steps > settings.max_steps_per_segment)
            throw std::runtime_error(
                "ssfm_propagate: step bound requires " + std::to_string(steps) +
                " steps in a segment (guard " + std::to_string(settings.max_steps_per_segment) +
                "); raise max_phase_per_step or the guard");
        const double h = seg.length / static_cast<double>(steps);
        const bool disp = seg.beta2 != 0.0;

        // Cumulative trapezoidal integral of g at the grid nodes, linearly
        // interpolated in between, so per-step integrals are O(1).
        std::vector<double> cum(seg.z_grid.size(), 0.0);
        const double dz = seg.length / static_cast<double>(seg.z_grid.size() - 1);
        for (std::size_t i = 1; i < cum.size(); ++i)
            cum[i] = cum[i - 1] + 0.5 * (seg.g_grid[i - 1] + seg.g_grid[i]) * dz;
        auto cum_at = [&](double z) {
            z = std::min(std::max(z, 0.0), seg.length);
            const double pos = z / dz;
            const std::size_t i = std::min(static_cast<std::size_t>(pos), cum.size() - 2);
            const double frac = pos - static_cast<double>(i);
            const double g1 = seg.g_grid[i];
            const double g2 = g1 + (seg.g_grid[i + 1] - g1) * frac;
            return cum[i] + 0.5 * (g1 + g2) * frac * dz;
        };

        // ASE variance per quadrature component, in normalized-envelope
        // units: PSD N0 = G F hnu / 2 per polarization over the full
        // simulation bandwidth, divided by the reference power P.
        double ase_var = 0.0;
        if (settings.include_ase && seg.is_active) {
            const double n0 = seg.gain * seg.noise_figure * settings.photon_energy / 2.0;
            ase_var = n0 * out.sample_rate / p_watt / 2.0;  // per quadrature, per pol
        }

        // Symmetric splitting: D(h/2) [N D(h)]^{steps-1} N D(h/2).
        if (disp) {
            detail::dispersion_step(out.x, seg.beta2, 0.5 * h, out.sample_rate);
            detail::dispersion_step(out.y, seg.beta2, 0.5 * h, out.sample_rate);
        }
        double zint_prev = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const double z2 = (s + 1 == steps) ? seg.length : h * static_cast<double>(s + 1);
            const double zint = cum_at(z2);
            const double phi = seg.gamma * p_watt * (zint - zint_prev);
            zint_prev = zint;
            for (std::size_t i = 0; i < len; ++i) {
                const double p = std::norm(out.x[i]) + std::norm(out.y[i]);
                const sigkit::cplx rot = std::polar(1.0, -phi * p);
                out.x[i] *= rot;
                out.y[i] *= rot;
            }
            if (ase_var > 0.0 && settings.distributed_ase) {
                const double v = ase_var / static_cast<double>(steps);
                detail::add_circular_noise(out.x, v, *rng);
                detail::add_circular_noise(out.y, v, *rng);
            }
            if (disp && s + 1 < steps) {
                detail::dispersion_step(out.x, seg.beta2, h, out.sample_rate);
                detail::dispersion_step(out.y, seg.beta2, h, out.sample_rate);
            }
        }
        if (disp) {
            detail::dispersion_step(out.x, seg.beta2, 0.5 * h, out.sample_rate);
            detail::dispersion_step(out.y, seg.beta2, 0.5 * h, out.sample_rate);
        }
        if (ase_var > 0.0 && !settings.distributed_ase) {
            detail::add_circular_noise(out.x, ase_var, *rng);
            detail::add_circular_noise(out.y, ase_var, *rng);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Receiver-noise budget: SNR = P / (Rs hnu (L F_RX + G_HPOA F_HPOA)).

struct LinkNoiseBudget {
    double fso_loss = 1.0;        // linear, >= 1
    double rx_gain = 1.0;         // linear
    double rx_noise_figure = 1.0; // linear
    double photon_energy = units::photon_energy();
    double symbol_rate = 0.0;     // Hz
    double hpoa_gain = 0.0;        // linear; 0 disables the amplifier ASE term
    double hpoa_noise_figure = 1.0;

    void validate() const {
        if (fso_loss < 1.0) throw std::invalid_argument("LinkNoiseBudget: fso_loss must be >= 1");
        if (rx_gain <= 0.0 || rx_noise_figure <= 0.0 || photon_energy <= 0.0 || symbol_rate <= 0.0 ||
            hpoa_gain < 0.0 || hpoa_noise_figure <= 0.0)
            throw std::invalid_argument("LinkNoiseBudget: nonpositive field");
    }
};

// Full two-term SNR and the loss-dominated approximation, in linear units.
inline double budget_snr(const LinkNoiseBudget& b, double p_watt) {
    b.validate();
    const double denom = b.symbol_rate * b.photon_energy *
                         (b.fso_loss * b.rx_noise_figure + b.hpoa_gain * b.hpoa_noise_figure);
    return p_watt / denom;
}
inline double budget_snr_approx(const LinkNoiseBudget& b, double p_watt) {
    b.validate();
    return p_watt / (b.symbol_rate * b.photon_energy * b.fso_loss * b.rx_noise_figure);
}

struct NoisyChannelResult {
    sigkit::DualPolSignal signal;
    double snr_linear = 0.0;
    double snr_db = 0.0;
    double snr_approx_db = 0.0;
};

// Adds white circular Gaussian noise over the full simulation bandwidth so
// the per-symbol SNR after matched filtering equals the budget SNR: with
// n = fs/Rs samples/symbol and unit mean symbol energy, the total
// two-polarization noise variance per sample is n/SNR.
inline NoisyChannelResult add_receiver_noise(const sigkit::DualPolSignal& in,
                                             const LinkNoiseBudget& budget, double p_watt,
                                             std::mt19937_64& rng) {
    const double snr = budget_snr(budget, p_watt);
    if (snr <= 0.0) throw std::invalid_argument("add_receiver_noise: infeasible SNR");
    const double n = in.sample_rate / budget.symbol_rate;
    const double var_per_component = n / snr / 4.0;  // 2 pols x 2 quadratures
    NoisyChannelResult out;
    out.signal = in;
    detail::add_circular_noise(out.signal.x, var_per_component, rng);
    detail::add_circular_noise(out.signal.y, var_per_component, rng);
    out.snr_linear = snr;
    out.snr_db = units::linear_to_db(snr);
    out.snr_approx_db = units::linear_to_db(budget_snr_approx(budget, p_watt));
    return out;
}

// Dispersionless end-to-end model: instantaneous nonlinear phase rotation
// followed by budget-calibrated AWGN.
inline NoisyChannelResult simplified_channel(const sigkit::DualPolSignal& in, double phi_bar,
                                             const LinkNoiseBudget& budget, double p_watt,
                                             std::mt19937_64& rng) {
    return add_receiver_noise(zero_dispersion_propagate(in, phi_bar), budget, p_watt, rng);
}

}  // namespace uplink::channel
