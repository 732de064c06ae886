// End-to-end acceptance gate. Each criterion prints exactly one pass/fail
// line; the process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "awgn_oracle.hpp"
#include "test_helpers.hpp"
#include "uplink/analytics.hpp"
#include "uplink/channel.hpp"
#include "uplink/dsp.hpp"
#include "uplink/harness.hpp"
#include "uplink/metrics.hpp"
#include "uplink/shaping.hpp"
#include "uplink/sigkit.hpp"
#include "uplink/units.hpp"

using namespace uplink;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail, double seconds,
            double budget_s) {
    const bool pass = ok && seconds < budget_s;
    std::printf("criterion %2d [%s] %s: %s (%.1f s / %.0f s budget)\n", idx,
                pass ? "PASS" : "FAIL", name, detail.c_str(), seconds, budget_s);
    if (!pass) ++g_failures;
}

template <typename F>
void run(int idx, const char* name, double budget_s, F body) {
    const auto t0 = clock_type::now();
    bool ok = false;
    std::string detail;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    report(idx, name, ok, detail, secs, budget_s);
}

std::string fmt(double v, int prec = 2) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << std::fixed << v;
    return ss.str();
}

// Shared sweep base: 100 GBd, 55 GHz one-sided filter, n = 2 samples/symbol,
// 64QAM family, 3 bits/2D target, desk-scale Monte Carlo.
harness::LinkConfig sweep_base() {
    harness::LinkConfig cfg;
    cfg.shaping.kind = harness::ShapingSpec::Kind::uniform;
    cfg.shaping.levels_per_dim = 8;
    cfg.target_gmi = 3.0;
    cfg.filter_bandwidth = 55e9;
    cfg.n = 2;
    return cfg;
}

std::vector<double> power_grid(double center_dbm, double lo_off = -7.0, double hi_off = 2.0) {
    std::vector<double> g;
    for (double o = lo_off; o <= hi_off + 1e-9; o += 1.0) g.push_back(center_dbm + o);
    return g;
}

// 95% uncertainty of the fitted acceptable loss: GMI confidence at the
// crossing divided by the local GMI-vs-loss slope.
double loss_uncertainty(const harness::LinkConfig& cfg, double p_dbm, double loss_db,
                        std::uint64_t point_index) {
    harness::PointEvaluator eval(cfg, p_dbm, point_index);
    const double lo = std::max(loss_db - 0.5, 0.0), hi = loss_db + 0.5;
    const auto a = eval.evaluate(lo);
    const auto b = eval.evaluate(hi);
    const double slope = (a.gmi_bits_2d - b.gmi_bits_2d) / (hi - lo);
    const double conf = std::max(a.confidence, b.confidence);
    return slope > 1e-6 ? conf / slope : 1e9;
}

struct MaxLoss {
    double loss_db;
    double power_dbm;
    std::size_t power_index;
};

MaxLoss max_loss(const harness::LinkConfig& cfg) {
    auto r = harness::max_acceptable_link_loss(cfg);
    const auto it = std::max_element(r.per_power_loss_db.begin(), r.per_power_loss_db.end());
    return {r.loss_db, r.optimal_power_dbm,
            static_cast<std::size_t>(it - r.per_power_loss_db.begin())};
}

// All length-n amplitude sequences sorted by (energy, lexicographic order).
std::vector<std::vector<int>> brute_force_codebook(const shaping::AmplitudeAlphabet& alpha,
                                                   int n) {
    std::vector<std::vector<int>> all;
    std::vector<int> cur;
    std::function<void()> rec = [&] {
        if (static_cast<int>(cur.size()) == n) {
            all.push_back(cur);
            return;
        }
        for (int a : alpha.levels) {
            cur.push_back(a);
            rec();
            cur.pop_back();
        }
    };
    rec();
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return shaping::sequence_energy(a) < shaping::sequence_energy(b);
    });
    return all;
}

}  // namespace

int main() {
    // 1: characteristic nonlinear power of the reference passive spans.
    run(1, "characteristic nonlinear power", 1.0, [](std::string& d) {
        const double p43 = units::watt_to_dbm(channel::characteristic_nonlinear_power(
            {channel::passive_segment(43.0, 1.27, 0.2)}));
        const double p3 = units::watt_to_dbm(channel::characteristic_nonlinear_power(
            {channel::passive_segment(3.0, 1.27, 0.2)}));
        d = "43 m: " + fmt(p43) + " dBm, 3 m: " + fmt(p3) + " dBm";
        return p43 > 42.6 && p43 < 42.8 && p3 > 54.1 && p3 < 54.3;
    });

    // 2: exact inversion of the split nonlinear phase compensation over the
    // noiseless dispersionless channel with unbounded bandwidth.
    run(2, "exact NLPC inversion", 10.0, [](std::string& d) {
        auto g = testutil::rng(2);
        auto shaped = harness::generate_burst({harness::ShapingSpec::Kind::uniform, 8}, 1 << 12, g);
        double worst = -1e9;
        for (double kappa : {0.0, 0.5, 1.0}) {
            dsp::ChainConfig chain;
            chain.pulse = sigkit::PulseShape(0.05, 1e-11);
            chain.n = 2;
            chain.nlpc_enabled = true;
            chain.kappa = kappa;
            chain.phi_bar = 1.1;
            auto sig = dsp::tx_chain(shaped.frame, chain);
            auto out = channel::zero_dispersion_propagate(sig, chain.phi_bar);
            auto rec = dsp::rx_chain(out, chain, &shaped.frame);
            worst = std::max(worst, metrics::evm_db(shaped.frame, rec));
        }
        d = "worst EVM " + fmt(worst, 1) + " dB over kappa {0, 0.5, 1}";
        return worst <= -120.0;
    });

    // 3: split-step propagation at zero dispersion reduces to the closed-form
    // phase rotation.
    run(3, "dispersionless split-step equivalence", 30.0, [](std::string& d) {
        auto g = testutil::rng(3);
        auto f = testutil::random_qpsk(1 << 12, g);
        auto sig = sigkit::modulate(f, sigkit::PulseShape(0.05, 1e-11), 2);
        auto seg = channel::passive_segment(43.0, 1.27, 0.2);
        const double pnl = channel::characteristic_nonlinear_power({seg});
        const double p = 1.1 * pnl;
        auto ssfm = channel::ssfm_propagate(sig, {seg}, p, channel::SsfmSettings{});
        auto closed = channel::zero_dispersion_propagate(sig, p / pnl);
        double maxdev = 0.0;
        for (std::size_t i = 0; i < sig.size(); ++i) {
            maxdev = std::max(maxdev, std::abs(ssfm.x[i] - closed.x[i]));
            maxdev = std::max(maxdev, std::abs(ssfm.y[i] - closed.y[i]));
        }
        d = "max per-sample deviation " + fmt(maxdev * 1e12, 3) + "e-12";
        return maxdev < 1e-9;
    });

    // 4: analytic spectral-broadening prediction vs split-step Monte Carlo for
    // a Maxwell-Boltzmann-shaped 100 GBd signal.
    run(4, "analytic vs Monte-Carlo spectrum", 600.0, [](std::string& d) {
        const double baud = 100e9;
        const int n = 2;
        const std::size_t nsym = 1 << 12;
        auto link = channel::calibrated_hpoa_link();
        const double pnl = link.p_nl_watt;
        const double p = 1.1 * pnl;  // mean nonlinear phase 1.1 rad

        sigkit::PulseShape pulse(0.05, 1.0 / baud);
        dsp::ChainConfig chain;
        chain.pulse = pulse;
        chain.n = n;
        const int bursts = 256;
        sigkit::PsdEstimate mc;
        harness::ShapingSpec spec;
        spec.kind = harness::ShapingSpec::Kind::mb;
        spec.levels_per_dim = 8;
        for (int b = 0; b < bursts; ++b) {
            auto g = harness::substream(4, 0, static_cast<std::uint64_t>(b));
            auto shaped = harness::generate_burst(spec, nsym, g);
            auto sig = dsp::tx_chain(shaped.frame, chain, p);
            auto out = channel::ssfm_propagate(sig, link.segments, p, channel::SsfmSettings{});
            sigkit::accumulate_psd(mc, sigkit::estimate_psd(out, out.size()),
                                   static_cast<std::size_t>(bursts));
        }

        auto r0 = analytics::input_autocorrelation_from_pulse(pulse, n * nsym, n);
        auto evolved = analytics::evolve_autocorrelation(r0, p / pnl);
        auto an = analytics::psd_from_autocorrelation(evolved);

        // Both curves normalized to unit power (peak normalization would
        // inherit the +2.5-sigma selection bias of the noisy maximum bin),
        // then smoothed with a short circular Daniell window - a plain
        // periodogram-variance reduction applied identically to both sides.
        const std::size_t nbins = mc.psd_x.size();
        std::vector<double> s_mc(nbins), s_an(nbins);
        double pow_mc = 0.0, pow_an = 0.0;
        for (std::size_t i = 0; i < nbins; ++i) {
            s_mc[i] = mc.psd_x[i] + mc.psd_y[i];
            pow_mc += s_mc[i];
            pow_an += an.psd[i];
        }
        const int half = 4;  // 8-bin window
        auto smooth = [&](const std::vector<double>& s, double norm) {
            std::vector<double> out(nbins, 0.0);
            for (std::size_t i = 0; i < nbins; ++i) {
                for (int o = -half; o < half; ++o)
                    out[i] += s[static_cast<std::size_t>(
                        (static_cast<long>(i) + o + static_cast<long>(nbins)) %
                        static_cast<long>(nbins))];
                out[i] /= 2.0 * half * norm;
            }
            return out;
        };
        auto sm_mc = smooth(s_mc, pow_mc);
        auto sm_an = smooth(an.psd, pow_an);
        const double peak_an = *std::max_element(sm_an.begin(), sm_an.end());
        double maxdev = 0.0;
        for (std::size_t i = 0; i < nbins; ++i) {
            if (sm_an[i] < 1e-3 * peak_an) continue;  // compare over peak - 30 dB
            maxdev = std::max(maxdev,
                              std::abs(units::linear_to_db(sm_mc[i] / sm_an[i])));
        }
        d = "max in-band deviation " + fmt(maxdev) + " dB over " + std::to_string(bursts) +
            " bursts";
        return maxdev <= 1.0;
    });

    // 5: rate estimator vs Gauss-Hermite quadrature over AWGN.
    run(5, "rate estimator oracle", 60.0, [](std::string& d) {
        double worst = 0.0;
        for (int lev : {2, 4}) {
            auto c = metrics::qam_constellation(lev);
            for (double snr : {5.0, 10.0, 15.0}) {
                const double oracle = testutil::awgn_bitwise_rate(c, snr);
                const auto est = testutil::simulate_awgn_gmi(
                    c, snr, 1 << 16, 500 + static_cast<std::uint64_t>(lev * 100 + snr));
                worst = std::max(worst, std::abs(est.gmi_bits_per_2d - oracle));
            }
        }
        d = "worst |estimate - quadrature| " + fmt(worst, 4) + " bits/2D";
        return worst <= 0.02;
    });

    // 6: shaping ordering at the peak-loss operating point: short-block sphere
    // shaping >= uniform 64QAM >= i.i.d. Maxwell-Boltzmann, gaps beyond the
    // Monte-Carlo confidence.
    run(6, "shaping ordering", 1800.0, [](std::string& d) {
        auto grid = power_grid(42.7);
        auto eval_kind = [&](harness::ShapingSpec::Kind kind) {
            auto cfg = sweep_base();
            cfg.shaping.kind = kind;
            cfg.power_grid_dbm = grid;
            auto m = max_loss(cfg);
            const double unc = loss_uncertainty(cfg, m.power_dbm, m.loss_db, m.power_index);
            return std::pair<double, double>(m.loss_db, unc);
        };
        auto [sp, sp_u] = eval_kind(harness::ShapingSpec::Kind::sphere);
        auto [un, un_u] = eval_kind(harness::ShapingSpec::Kind::uniform);
        auto [mb, mb_u] = eval_kind(harness::ShapingSpec::Kind::mb);
        d = "sphere(N=4) " + fmt(sp) + " dB, uniform " + fmt(un) + " dB, MB " + fmt(mb) + " dB";
        return sp - un > sp_u + un_u && un - mb > un_u + mb_u;
    });

    // 7: nonlinear-phase-compensation gains under the 55 GHz filter.
    run(7, "NLPC gains", 2700.0, [](std::string& d) {
        auto grid = power_grid(42.7);
        auto eval_nlpc = [&](bool enabled, double kappa) {
            auto cfg = sweep_base();
            cfg.shaping.kind = harness::ShapingSpec::Kind::sphere;
            cfg.power_grid_dbm = grid;
            cfg.nlpc_enabled = enabled;
            cfg.kappa = kappa;
            return max_loss(cfg).loss_db;
        };
        const double none = eval_nlpc(false, 0.0);
        const double tx = eval_nlpc(true, 1.0);
        const double split = eval_nlpc(true, 0.6);
        const double rx = eval_nlpc(true, 0.0);
        d = "none " + fmt(none) + ", tx " + fmt(tx) + ", kappa 0.6 " + fmt(split) + ", rx " +
            fmt(rx) + " dB";
        return tx - none >= 1.0 && split >= tx && rx <= std::min({tx, split});
    });

    // 8: oversampling saturates at 2 samples/symbol under the 55 GHz filter.
    run(8, "oversampling saturation", 1800.0, [](std::string& d) {
        auto grid = power_grid(42.7);
        auto eval_n = [&](int n) {
            auto cfg = sweep_base();
            cfg.power_grid_dbm = grid;
            cfg.n = n;
            return max_loss(cfg).loss_db;
        };
        const double l2 = eval_n(2);
        const double l8 = eval_n(8);
        d = "n=2: " + fmt(l2) + " dB, n=8: " + fmt(l8) + " dB";
        return std::abs(l2 - l8) < 0.3;
    });

    // 9: split-step propagation through four physically different high-power
    // chains matches the dispersionless model at equal characteristic
    // nonlinear power, and the model's peak loss is linear in it.
    run(9, "dispersionless-model equivalence", 3600.0, [](std::string& d) {
        auto simplified_at = [&](double pnl_dbm) {
            auto cfg = sweep_base();
            cfg.p_nl_dbm = pnl_dbm;
            cfg.power_grid_dbm = power_grid(pnl_dbm);
            return max_loss(cfg).loss_db;
        };

        std::vector<std::vector<channel::FiberSegmentProfile>> chains;
        chains.push_back(channel::calibrated_hpoa_link().segments);
        chains.push_back({channel::passive_segment(3.0, 1.27, 0.2)});
        chains.push_back({channel::passive_segment(43.0, 1.27, 0.2)});
        // Low-nonlinearity two-stage amplifier: 6.2 m doped fiber lifting
        // 27 dBm to roughly the optimal launch power.
        chains.push_back({channel::active_segment(6.2, 0.5, 0.2, 17.0,
                                                  units::db_to_linear(13.0),
                                                  units::db_to_linear(5.0))});
        double worst_gap = 0.0;
        for (const auto& segs : chains) {
            const double pnl_dbm =
                units::watt_to_dbm(channel::characteristic_nonlinear_power(segs));
            auto cfg = sweep_base();
            cfg.use_ssfm = true;
            cfg.segments = segs;
            cfg.p_nl_dbm = pnl_dbm;
            cfg.power_grid_dbm = power_grid(pnl_dbm);
            const double ssfm_loss = max_loss(cfg).loss_db;
            worst_gap = std::max(worst_gap, std::abs(ssfm_loss - simplified_at(pnl_dbm)));
        }

        // Unit slope of peak loss vs characteristic power over a 12 dB span.
        const std::vector<double> pnls{42.7, 46.7, 50.7, 54.7};
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (double v : pnls) {
            const double y = simplified_at(v);
            sx += v;
            sy += y;
            sxx += v * v;
            sxy += v * y;
        }
        const double m = static_cast<double>(pnls.size());
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        d = "worst model gap " + fmt(worst_gap) + " dB, slope " + fmt(slope, 3) + " dB/dB";
        return worst_gap <= 0.5 && std::abs(slope - 1.0) <= 0.1;
    });

    // 10: distribution-matcher property suite.
    run(10, "distribution matcher properties", 120.0, [](std::string& d) {
        shaping::AmplitudeAlphabet alpha(4);
        // Lookup-table bijection at the 12-bit address width.
        shaping::LutDm lut12(alpha, 6, 12);
        for (std::uint64_t b = 0; b < lut12.table_size(); ++b)
            if (lut12.decode(lut12.row(b)) != b) {
                d = "LUT bijection failed";
                return false;
            }
        // Enumerative sphere shaping bijection at block length 8.
        auto ess = shaping::EssDm::with_input_bits(alpha, 8, 12);
        for (std::uint64_t b = 0; b < (1ull << ess.input_bits()); ++b)
            if (ess.decode(ess.encode(b)) != shaping::bigint(b)) {
                d = "sphere-shaping bijection failed";
                return false;
            }
        // Constant-composition bijection at block length 8.
        shaping::CcdmDm ccdm(alpha, {3, 2, 2, 1});
        for (std::uint64_t b = 0; b < (1ull << ccdm.input_bits()); ++b)
            if (ccdm.decode(ccdm.encode(b)) != shaping::bigint(b)) {
                d = "constant-composition bijection failed";
                return false;
            }
        // Sphere-shaping and lookup-table codebooks carry the same energy
        // multiset on the 32-entry block-length-4 table.
        shaping::LutDm lut(alpha, 4, 5);
        auto ess4 = shaping::EssDm::with_input_bits(alpha, 4, 5);
        std::multiset<long long> el, ee;
        for (std::uint64_t b = 0; b < 32; ++b) {
            el.insert(shaping::sequence_energy(lut.row(b)));
            ee.insert(shaping::sequence_energy(ess4.encode(b)));
        }
        if (el != ee) {
            d = "codebook energy multisets differ";
            return false;
        }
        // Every address-width prefix of the table is a minimum-energy codebook.
        shaping::LutDm lut7(alpha, 4, 7);
        auto oracle = brute_force_codebook(alpha, 4);
        for (int kp = 0; kp <= 7; ++kp) {
            long long pm = 0, om = 0;
            for (std::size_t i = 0; i < (1ull << kp); ++i) {
                pm = std::max(pm, shaping::sequence_energy(lut7.row(i)));
                om = std::max(om, shaping::sequence_energy(oracle[i]));
            }
            if (pm != om) {
                d = "prefix optimality failed at k=" + std::to_string(kp);
                return false;
            }
        }
        d = "bijections, energy multiset, prefix optimality";
        return true;
    });

    // 11: compensation complexity formula.
    run(11, "complexity formula", 1.0, [](std::string& d) {
        const double v = dsp::nlpc_complexity(2);
        d = "nlpc_complexity(2) = " + fmt(v, 1) + " RM/2D";
        return v == 11.0;
    });

    return g_failures == 0 ? 0 : 1;
}
