#pragma once

// Transmitter and receiver DSP chains: PAS-mapped symbols -> pulse shaping
// -> TX nonlinear phase compensation -> TX filter, and RX filter -> RX
// compensation -> matched filter -> symbol-rate sampling, plus the
// compensation complexity model.

#include <cmath>
#include <stdexcept>

#include "uplink/channel.hpp"
#include "uplink/sigkit.hpp"

namespace uplink::dsp {

// Split nonlinear phase compensation: a fraction kappa of the average
// accumulated nonlinear phase phi_bar is pre-rotated at the transmitter,
// the remaining (1 - kappa) is de-rotated at the receiver.
struct NlpcConfig {
    double phi_bar = 0.0;  // rad, = P / P_NL
    double kappa = 0.0;    // splitting ratio in [0, 1]
    int n = 2;             // samples per symbol on the compensation grid

    void validate() const {
        if (kappa < 0.0 || kappa > 1.0) throw std::invalid_argument("NlpcConfig: kappa outside [0,1]");
        if (n < 1) throw std::invalid_argument("NlpcConfig: n must be >= 1");
        if (phi_bar < 0.0) throw std::invalid_argument("NlpcConfig: phi_bar < 0");
    }
};

namespace detail {

inline sigkit::DualPolSignal phase_rotate(const sigkit::DualPolSignal& in, double weight) {
    sigkit::DualPolSignal out = in;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double p = std::norm(out.x[i]) + std::norm(out.y[i]);
        const sigkit::cplx rot = std::polar(1.0, weight * p);
        out.x[i] *= rot;
        out.y[i] *= rot;
    }
    return out;
}

}  // namespace detail

// x'[k] = x[k] exp(+j kappa phi_bar |x[k]|^2).
inline sigkit::DualPolSignal nlpc_tx(const sigkit::DualPolSignal& in, const NlpcConfig& cfg) {
    cfg.validate();
    return detail::phase_rotate(in, cfg.kappa * cfg.phi_bar);
}

// y[k] = y'[k] exp(+j (1 - kappa) phi_bar |y'[k]|^2).
inline sigkit::DualPolSignal nlpc_rx(const sigkit::DualPolSignal& in, const NlpcConfig& cfg) {
    cfg.validate();
    return detail::phase_rotate(in, (1.0 - cfg.kappa) * cfg.phi_bar);
}

// Real multiplications per 2D symbol for the compensation stage.
inline double nlpc_complexity(int n) {
    if (n < 1) throw std::invalid_argument("nlpc_complexity: n must be >= 1");
    return 5.5 * n;
}

// ---------------------------------------------------------------------------
// Chain configuration shared by TX and RX.

struct ChainConfig {
    sigkit::PulseShape pulse{0.05, 1e-11};
    int n = 2;                        // samples per symbol
    double filter_bandwidth = 0.0;    // one-sided, Hz; <= 0 disables the brickwall
    bool nlpc_enabled = false;
    double kappa = 0.0;
    double phi_bar = 0.0;

    NlpcConfig nlpc() const { return {phi_bar, kappa, n}; }
};

// Pulse shaping, optional TX compensation, then the TX brickwall (the
// physical DAC limit comes last).
inline sigkit::DualPolSignal tx_chain(const sigkit::SymbolFrame& frame, const ChainConfig& cfg,
                                      double avg_power = 1.0) {
    auto sig = sigkit::modulate(frame, cfg.pulse, cfg.n, avg_power);
    if (cfg.nlpc_enabled) sig = nlpc_tx(sig, cfg.nlpc());
    if (cfg.filter_bandwidth > 0.0)
        sig = sigkit::apply_brickwall(sig, sigkit::BrickwallFilter{cfg.filter_bandwidth});
    return sig;
}

// Least-squares complex gain fit of the received frame onto the reference.
inline sigkit::cplx complex_gain_fit(const sigkit::SymbolFrame& reference,
                                     const sigkit::SymbolFrame& received) {
    if (reference.size() != received.size() || reference.size() == 0)
        throw std::invalid_argument("complex_gain_fit: frame size mismatch");
    sigkit::cplx num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        num += std::conj(reference.x[k]) * received.x[k] +
               std::conj(reference.y[k]) * received.y[k];
        den += std::norm(reference.x[k]) + std::norm(reference.y[k]);
    }
    if (den <= 0.0) throw std::invalid_argument("complex_gain_fit: degenerate reference");
    return num / den;
}

// RX brickwall, RX compensation, matched filter, symbol-rate sampling; the
// output is scaled by a data-aided complex gain fitted to the reference
// frame when one is supplied.
inline sigkit::SymbolFrame rx_chain(const sigkit::DualPolSignal& in, const ChainConfig& cfg,
                                    const sigkit::SymbolFrame* reference = nullptr) {
    sigkit::DualPolSignal sig = in;
    if (cfg.filter_bandwidth > 0.0)
        sig = sigkit::apply_brickwall(sig, sigkit::BrickwallFilter{cfg.filter_bandwidth});
    if (cfg.nlpc_enabled) sig = nlpc_rx(sig, cfg.nlpc());
    auto frame = sigkit::matched_filter_and_sample(sig, cfg.pulse, cfg.n);
    if (reference != nullptr) {
        const sigkit::cplx g = complex_gain_fit(*reference, frame);
        if (std::abs(g) <= 0.0) throw std::invalid_argument("rx_chain: degenerate gain fit");
        for (auto& s : frame.x) s /= g;
        for (auto& s : frame.y) s /= g;
    }
    return frame;
}

}  // namespace uplink::dsp
