#include "doctest.h"

#include "test_helpers.hpp"
#include "uplink/channel.hpp"
#include "uplink/dsp.hpp"
#include "uplink/units.hpp"

using namespace uplink;
using namespace uplink::dsp;

namespace {

sigkit::DualPolSignal random_burst(std::size_t nsym, int n, std::uint64_t seed,
                                   double baud = 100e9) {
    auto g = testutil::rng(seed);
    auto f = testutil::random_qpsk(nsym, g);
    return sigkit::modulate(f, sigkit::PulseShape(0.05, 1.0 / baud), n);
}

double frame_evm_db(const sigkit::SymbolFrame& ref, const sigkit::SymbolFrame& rec) {
    double err = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        err += std::norm(rec.x[k] - ref.x[k]) + std::norm(rec.y[k] - ref.y[k]);
        den += std::norm(ref.x[k]) + std::norm(ref.y[k]);
    }
    return 10.0 * std::log10(err / den);
}

}  // namespace

TEST_CASE("NLPC endpoints") {
    auto sig = random_burst(1 << 9, 2, 3);
    SUBCASE("kappa = 0: TX stage is the identity") {
        auto out = nlpc_tx(sig, {1.1, 0.0, 2});
        for (std::size_t i = 0; i < sig.size(); ++i) CHECK(out.x[i] == sig.x[i]);
    }
    SUBCASE("kappa = 1: RX stage is the identity") {
        auto out = nlpc_rx(sig, {1.1, 1.0, 2});
        for (std::size_t i = 0; i < sig.size(); ++i) CHECK(out.y[i] == sig.y[i]);
    }
    SUBCASE("validation") {
        CHECK_THROWS(nlpc_tx(sig, {1.1, -0.1, 2}));
        CHECK_THROWS(nlpc_tx(sig, {1.1, 1.5, 2}));
        CHECK_THROWS(nlpc_tx(sig, {-1.0, 0.5, 2}));
        CHECK_THROWS(nlpc_tx(sig, {1.1, 0.5, 0}));
    }
}

TEST_CASE("NLPC matches the per-sample scalar reference") {
    auto sig = random_burst(1 << 9, 2, 7);
    const double kappa = 0.6, phi = 1.1;
    auto out = nlpc_tx(sig, {phi, kappa, 2});
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const double p = std::norm(sig.x[i]) + std::norm(sig.y[i]);
        const sigkit::cplx expect_x = sig.x[i] * std::exp(sigkit::cplx(0.0, kappa * phi * p));
        const sigkit::cplx expect_y = sig.y[i] * std::exp(sigkit::cplx(0.0, kappa * phi * p));
        CHECK(std::abs(out.x[i] - expect_x) < 1e-14);
        CHECK(std::abs(out.y[i] - expect_y) < 1e-14);
    }
}

TEST_CASE("NLPC preserves magnitudes and composes additively in kappa") {
    auto sig = random_burst(1 << 9, 2, 13);
    const double phi = 0.9;
    auto once = nlpc_tx(nlpc_tx(sig, {phi, 0.25, 2}), {phi, 0.35, 2});
    auto direct = nlpc_tx(sig, {phi, 0.6, 2});
    for (std::size_t i = 0; i < sig.size(); ++i) {
        CHECK(std::abs(once.x[i] - direct.x[i]) < 1e-13);
        CHECK(std::abs(std::abs(once.x[i]) - std::abs(sig.x[i])) < 1e-13);
        CHECK(std::abs(std::abs(once.y[i]) - std::abs(sig.y[i])) < 1e-13);
    }
}

TEST_CASE("TX compensation exactly cancels the dispersionless channel") {
    auto sig = random_burst(1 << 10, 2, 17);
    const double phi = 1.1;
    auto out = channel::zero_dispersion_propagate(nlpc_tx(sig, {phi, 1.0, 2}), phi);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        CHECK(std::abs(out.x[i] - sig.x[i]) < 1e-13);
        CHECK(std::abs(out.y[i] - sig.y[i]) < 1e-13);
    }
}

TEST_CASE("split compensation inverts the noiseless channel for any kappa") {
    auto sig = random_burst(1 << 10, 2, 19);
    const double phi = 1.1;
    for (double kappa : {0.0, 0.3, 0.5, 1.0}) {
        NlpcConfig cfg{phi, kappa, 2};
        auto out = nlpc_rx(channel::zero_dispersion_propagate(nlpc_tx(sig, cfg), phi), cfg);
        double maxdev = 0.0;
        for (std::size_t i = 0; i < sig.size(); ++i) {
            maxdev = std::max(maxdev, std::abs(out.x[i] - sig.x[i]));
            maxdev = std::max(maxdev, std::abs(out.y[i] - sig.y[i]));
        }
        CHECK(maxdev < 1e-9);
    }
}

TEST_CASE("complexity model") {
    CHECK(nlpc_complexity(2) == 11.0);
    CHECK(nlpc_complexity(1) == 5.5);
    CHECK(nlpc_complexity(8) == 44.0);
    CHECK_THROWS(nlpc_complexity(0));
}

TEST_CASE("full chain loopback without a channel") {
    const double baud = 100e9;
    auto g = testutil::rng(23);
    auto f = testutil::random_qam(1 << 10, 4, g);
    ChainConfig cfg;
    cfg.pulse = sigkit::PulseShape(0.05, 1.0 / baud);
    cfg.n = 2;
    auto rec = rx_chain(tx_chain(f, cfg), cfg, &f);
    CHECK(frame_evm_db(f, rec) < -120.0);
}

TEST_CASE("chain inverts the phi_bar = 1.1 channel with kappa = 1, unbounded bandwidth") {
    const double baud = 100e9;
    auto g = testutil::rng(29);
    auto f = testutil::random_qam(1 << 10, 4, g);
    ChainConfig cfg;
    cfg.pulse = sigkit::PulseShape(0.05, 1.0 / baud);
    cfg.n = 2;
    cfg.nlpc_enabled = true;
    cfg.kappa = 1.0;
    cfg.phi_bar = 1.1;
    auto rx = channel::zero_dispersion_propagate(tx_chain(f, cfg), cfg.phi_bar);
    auto rec = rx_chain(rx, cfg, &f);
    CHECK(frame_evm_db(f, rec) < -120.0);
}

TEST_CASE("band-limited inversion leaves a residual") {
    const double baud = 100e9;
    auto g = testutil::rng(31);
    auto f = testutil::random_qam(1 << 10, 4, g);
    ChainConfig cfg;
    cfg.pulse = sigkit::PulseShape(0.05, 1.0 / baud);
    cfg.n = 2;
    cfg.filter_bandwidth = 55e9;
    cfg.nlpc_enabled = true;
    cfg.phi_bar = 1.1;

    SUBCASE("kappa = 1: nonzero EVM, recorded regression window") {
        cfg.kappa = 1.0;
        auto rx = channel::zero_dispersion_propagate(tx_chain(f, cfg), cfg.phi_bar);
        const double evm = frame_evm_db(rx_chain(rx, cfg, &f), f);
        CHECK(evm > -60.0);  // residual exists
        CHECK(evm < -10.0);  // but the link still works
    }
    SUBCASE("kappa = 0 and kappa = 1 differ when only the RX is band-limited") {
        ChainConfig txcfg = cfg;
        txcfg.filter_bandwidth = 0.0;  // unconstrained transmitter
        auto evm_for = [&](double kappa) {
            txcfg.kappa = kappa;
            cfg.kappa = kappa;
            auto rx = channel::zero_dispersion_propagate(tx_chain(f, txcfg), cfg.phi_bar);
            return frame_evm_db(rx_chain(rx, cfg, &f), f);
        };
        CHECK(std::abs(evm_for(0.0) - evm_for(1.0)) > 0.1);
    }
}

TEST_CASE("gain fit removes a global complex rotation") {
    auto g = testutil::rng(37);
    auto f = testutil::random_qpsk(1 << 8, g);
    sigkit::SymbolFrame rotated = f;
    const sigkit::cplx rot = std::polar(0.8, 1.2);
    for (auto& s : rotated.x) s *= rot;
    for (auto& s : rotated.y) s *= rot;
    const sigkit::cplx fit = complex_gain_fit(f, rotated);
    CHECK(std::abs(fit - rot) < 1e-12);
    sigkit::SymbolFrame empty;
    CHECK_THROWS(complex_gain_fit(f, empty));
}
