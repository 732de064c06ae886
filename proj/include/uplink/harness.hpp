#pragma once

// Experiment orchestration: configuration parsing/validation, deterministic
// seeding, the acceptable-link-loss search, sweeps, and result records.

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uplink/analytics.hpp"
#include "uplink/channel.hpp"
#include "uplink/dsp.hpp"
#include "uplink/metrics.hpp"
#include "uplink/shaping.hpp"
#include "uplink/sigkit.hpp"
#include "uplink/units.hpp"

namespace uplink::harness {

using json = nlohmann::json;

// Configuration problems carry the offending field path.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string f, const std::string& what)
        : std::runtime_error(f + ": " + what), field(std::move(f)) {}
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------

struct ShapingSpec {
    enum class Kind { uniform, mb, sphere };
    Kind kind = Kind::uniform;
    int levels_per_dim = 8;  // QAM levels per quadrature (8 -> 64QAM)
    double dm_rate = 1.25;   // MB target, bits/amplitude
    int block_length = 4;    // sphere-shaping DM block
    int input_bits = 5;      // sphere-shaping DM input word
};

struct LinkConfig {
    double baud = 100e9;
    double roll_off = 0.05;
    int n = 2;                        // samples per symbol
    double filter_bandwidth = 55e9;   // one-sided; <= 0 disables
    ShapingSpec shaping;
    double target_gmi = 3.0;          // bits/2D
    std::vector<double> power_grid_dbm{30.0};
    bool nlpc_enabled = false;
    double kappa = 0.0;
    bool use_ssfm = false;
    std::vector<channel::FiberSegmentProfile> segments;  // SSFM path
    double p_nl_dbm = 42.7;           // simplified path (and phi_bar source)
    double rx_noise_figure_db = 5.0;
    double hpoa_gain_db = -1.0;       // < 0: no amplifier ASE term in the budget
    double hpoa_noise_figure_db = 5.0;
    std::size_t symbols_per_burst = 1 << 14;
    int bursts = 4;
    std::uint64_t seed = 1;

    double p_nl_watt() const { return units::dbm_to_watt(p_nl_dbm); }

    channel::LinkNoiseBudget budget(double loss_db) const {
        channel::LinkNoiseBudget b;
        b.symbol_rate = baud;
        b.fso_loss = units::db_to_linear(std::max(loss_db, 0.0));
        b.rx_noise_figure = units::db_to_linear(rx_noise_figure_db);
        if (hpoa_gain_db >= 0.0) {
            b.hpoa_gain = units::db_to_linear(hpoa_gain_db);
            b.hpoa_noise_figure = units::db_to_linear(hpoa_noise_figure_db);
        }
        return b;
    }

    dsp::ChainConfig chain(double p_watt) const {
        dsp::ChainConfig c;
        c.pulse = sigkit::PulseShape(roll_off, 1.0 / baud);
        c.n = n;
        c.filter_bandwidth = filter_bandwidth;
        c.nlpc_enabled = nlpc_enabled;
        c.kappa = kappa;
        c.phi_bar = p_watt / p_nl_watt();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Config parsing with field-path errors.

namespace detail {

template <typename T>
T field(const json& j, const std::string& path, std::optional<T> fallback = std::nullopt) {
    const json* cur = &j;
    std::string walked;
    std::istringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!cur->is_object() || !cur->contains(part)) {
            if (fallback) return *fallback;
            throw ConfigError(path, "missing required field");
        }
        cur = &(*cur)[part];
    }
    try {
        return cur->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path, "wrong type");
    }
}

}  // namespace detail

inline LinkConfig parse_config(const json& j) {
    LinkConfig c;
    c.baud = detail::field<double>(j, "tx.baud", c.baud);
    if (c.baud <= 0.0) throw ConfigError("tx.baud", "must be > 0");
    c.roll_off = detail::field<double>(j, "tx.rolloff", c.roll_off);
    if (c.roll_off < 0.0 || c.roll_off > 1.0) throw ConfigError("tx.rolloff", "must be in [0, 1]");
    c.n = detail::field<int>(j, "nlpc.n", c.n);
    if (c.n < 1) throw ConfigError("nlpc.n", "must be >= 1");
    c.filter_bandwidth = detail::field<double>(j, "filters.bandwidth_ghz_onesided",
                                               c.filter_bandwidth / 1e9) * 1e9;
    c.nlpc_enabled = detail::field<bool>(j, "nlpc.enabled", c.nlpc_enabled);
    c.kappa = detail::field<double>(j, "nlpc.kappa", c.kappa);
    if (c.kappa < 0.0 || c.kappa > 1.0) throw ConfigError("nlpc.kappa", "must be in [0, 1]");

    const std::string kind = detail::field<std::string>(j, "shaping.kind", std::string("uniform"));
    if (kind == "uniform")
        c.shaping.kind = ShapingSpec::Kind::uniform;
    else if (kind == "mb")
        c.shaping.kind = ShapingSpec::Kind::mb;
    else if (kind == "sphere")
        c.shaping.kind = ShapingSpec::Kind::sphere;
    else
        throw ConfigError("shaping.kind", "expected uniform | mb | sphere");
    c.shaping.levels_per_dim = detail::field<int>(j, "shaping.levels_per_dim", 8);
    if (c.shaping.levels_per_dim < 2 || (c.shaping.levels_per_dim & 1))
        throw ConfigError("shaping.levels_per_dim", "must be even >= 2");
    c.shaping.dm_rate = detail::field<double>(j, "shaping.dm_rate", c.shaping.dm_rate);
    c.shaping.block_length = detail::field<int>(j, "shaping.block_length", c.shaping.block_length);
    c.shaping.input_bits = detail::field<int>(j, "shaping.input_bits", c.shaping.input_bits);
    if (c.shaping.kind == ShapingSpec::Kind::sphere && c.shaping.block_length % 4 != 0 &&
        c.shaping.block_length != 4)
        throw ConfigError("shaping.block_length", "sphere shaping blocks must map to whole 4D symbols");

    c.target_gmi = detail::field<double>(j, "target_gmi", c.target_gmi);
    if (c.target_gmi <= 0.0) throw ConfigError("target_gmi", "must be > 0");
    c.power_grid_dbm =
        detail::field<std::vector<double>>(j, "launch_power_dbm", c.power_grid_dbm);
    if (c.power_grid_dbm.empty()) throw ConfigError("launch_power_dbm", "must be nonempty");

    c.p_nl_dbm = detail::field<double>(j, "channel.p_nl_dbm", c.p_nl_dbm);
    const std::string model = detail::field<std::string>(j, "channel.model", std::string("simplified"));
    if (model == "ssfm") {
        c.use_ssfm = true;
        if (j.contains("channel") && j["channel"].contains("segments")) {
            std::size_t idx = 0;
            for (const auto& js : j["channel"]["segments"]) {
                const std::string base = "channel.segments[" + std::to_string(idx) + "]";
                const double len = detail::field<double>(js, "length_m");
                const double gam = detail::field<double>(js, "gamma_per_w_km");
                const double att = detail::field<double>(js, "alpha_db_km", 0.0);
                if (len <= 0.0) throw ConfigError(base + ".length_m", "must be > 0");
                const double gain_db = detail::field<double>(js, "gain_db", -1.0);
                if (gain_db >= 0.0) {
                    const double d = detail::field<double>(js, "D_ps_nm_km", 17.0);
                    const double nf = detail::field<double>(js, "nf_db", 5.0);
                    c.segments.push_back(channel::active_segment(
                        len, gam, att, d, units::db_to_linear(gain_db), units::db_to_linear(nf)));
                } else {
                    double beta2 = 0.0;
                    if (js.contains("beta2_ps2_km"))
                        beta2 = units::beta2_si(detail::field<double>(js, "beta2_ps2_km"));
                    else if (js.contains("D_ps_nm_km"))
                        beta2 = units::beta2_from_dispersion(detail::field<double>(js, "D_ps_nm_km"));
                    c.segments.push_back(channel::passive_segment(len, gam, att, beta2));
                }
                ++idx;
            }
        } else {
            // Default amplifier chain calibrated to the configured P_NL.
            c.segments = channel::calibrated_hpoa_link(c.p_nl_dbm).segments;
        }
        c.p_nl_dbm = units::watt_to_dbm(channel::characteristic_nonlinear_power(c.segments));
    } else if (model != "simplified") {
        throw ConfigError("channel.model", "expected simplified | ssfm");
    }

    c.rx_noise_figure_db = detail::field<double>(j, "budget.rx_nf_db", c.rx_noise_figure_db);
    c.hpoa_gain_db = detail::field<double>(j, "budget.hpoa_gain_db", c.hpoa_gain_db);
    c.hpoa_noise_figure_db =
        detail::field<double>(j, "budget.hpoa_nf_db", c.hpoa_noise_figure_db);
    const int spb = detail::field<int>(j, "mc.symbols_per_burst",
                                       static_cast<int>(c.symbols_per_burst));
    if (spb < 16) throw ConfigError("mc.symbols_per_burst", "must be >= 16");
    c.symbols_per_burst = static_cast<std::size_t>(spb);
    c.bursts = detail::field<int>(j, "mc.bursts", c.bursts);
    if (c.bursts < 1) throw ConfigError("mc.bursts", "must be >= 1");
    c.seed = detail::field<std::uint64_t>(j, "seed", c.seed);
    return c;
}

// FNV-1a over the canonical dump, for provenance records.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
}

// Deterministic substream keyed by (seed, point, burst).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t point, std::uint64_t burst) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(burst),
                      0x9e3779b9u};
    return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Shaped burst generation.

struct ShapedBurst {
    sigkit::SymbolFrame frame;
    metrics::Constellation constellation;  // priors in decoder units
};

inline ShapedBurst generate_burst(const ShapingSpec& spec, std::size_t symbols,
                                  std::mt19937_64& rng) {
    const int na = spec.levels_per_dim / 2;
    std::bernoulli_distribution coin(0.5);
    const std::size_t namps = 4 * symbols;  // two 2D symbols = one 4D group
    std::vector<int> amps, signs;
    amps.reserve(namps);
    signs.reserve(namps);
    std::vector<double> amp_priors;
    if (na == 1) {
        // Single-amplitude constellation (QPSK): nothing to shape.
        amps.assign(namps, 1);
        amp_priors = {1.0};
        for (std::size_t i = 0; i < namps; ++i) signs.push_back(coin(rng) ? 1 : -1);
        ShapedBurst out;
        out.frame = shaping::pas_frame(amps, signs);
        out.constellation = metrics::qam_constellation(2);
        return out;
    }
    shaping::AmplitudeAlphabet alpha(na);
    switch (spec.kind) {
        case ShapingSpec::Kind::uniform: {
            std::uniform_int_distribution<int> pick(0, na - 1);
            for (std::size_t i = 0; i < namps; ++i)
                amps.push_back(alpha.levels[static_cast<std::size_t>(pick(rng))]);
            amp_priors.assign(static_cast<std::size_t>(na), 1.0 / na);
            break;
        }
        case ShapingSpec::Kind::mb: {
            auto mb = shaping::mb_distribution(alpha, spec.dm_rate);
            amps = shaping::mb_sample(mb, namps, rng);
            amp_priors = mb.probs;
            break;
        }
        case ShapingSpec::Kind::sphere: {
            shaping::LutDm dm(alpha, spec.block_length, spec.input_bits);
            std::uniform_int_distribution<std::uint64_t> word(0, dm.table_size() - 1);
            while (amps.size() < namps) {
                auto block = dm.encode(word(rng));
                amps.insert(amps.end(), block.begin(), block.end());
            }
            amps.resize(namps);
            // Decoder priors: the codebook's marginal amplitude distribution.
            amp_priors.assign(static_cast<std::size_t>(na), 0.0);
            for (std::uint64_t b = 0; b < dm.table_size(); ++b)
                for (int a : dm.row(b))
                    amp_priors[static_cast<std::size_t>((a - 1) / 2)] +=
                        1.0 / (static_cast<double>(dm.table_size()) * dm.block_length());
            break;
        }
    }
    for (std::size_t i = 0; i < namps; ++i) signs.push_back(coin(rng) ? 1 : -1);
    ShapedBurst out;
    out.frame = shaping::pas_frame(amps, signs);
    out.constellation = metrics::qam_constellation(spec.levels_per_dim, amp_priors);
    return out;
}

// ---------------------------------------------------------------------------
// Single-point evaluation with common random numbers across loss values:
// the noiseless channel output and a unit-variance noise realization are
// frozen per burst; only the noise scale follows the loss.

class PointEvaluator {
  public:
    PointEvaluator(const LinkConfig& cfg, double p_dbm, std::uint64_t point_index)
        : cfg_(cfg), p_watt_(units::dbm_to_watt(p_dbm)), chain_(cfg.chain(p_watt_)) {
        for (int b = 0; b < cfg_.bursts; ++b) {
            auto rng = substream(cfg_.seed, point_index, static_cast<std::uint64_t>(b));
            Burst burst;
            auto shaped = generate_burst(cfg_.shaping, cfg_.symbols_per_burst, rng);
            burst.tx = std::move(shaped.frame);
            burst.constellation = std::move(shaped.constellation);
            auto sig = dsp::tx_chain(burst.tx, chain_, p_watt_);
            if (cfg_.use_ssfm) {
                burst.channel_out = channel::ssfm_propagate(sig, cfg_.segments, p_watt_,
                                                            channel::SsfmSettings{});
            } else {
                burst.channel_out = channel::zero_dispersion_propagate(sig, chain_.phi_bar);
            }
            std::normal_distribution<double> gauss(0.0, 1.0);
            burst.noise_x.resize(sig.size());
            burst.noise_y.resize(sig.size());
            for (std::size_t i = 0; i < sig.size(); ++i) {
                burst.noise_x[i] = sigkit::cplx(gauss(rng), gauss(rng));
                burst.noise_y[i] = sigkit::cplx(gauss(rng), gauss(rng));
            }
            bursts_.push_back(std::move(burst));
        }
    }

    struct Result {
        double gmi_bits_2d = 0.0;
        double confidence = 0.0;
        double snr_db = 0.0;
        double evm_db = 0.0;
    };

    Result evaluate(double loss_db) const {
        const auto budget = cfg_.budget(loss_db);
        const double snr = channel::budget_snr(budget, p_watt_);
        const double sigma_q = std::sqrt(static_cast<double>(cfg_.n) / snr / 4.0);
        Result res;
        res.snr_db = units::linear_to_db(snr);
        // Concatenate bursts into one estimate: same sample budget, a
        // single auxiliary-variance search.
        sigkit::SymbolFrame tx_all, rec_all;
        for (const auto& burst : bursts_) {
            sigkit::DualPolSignal rx = burst.channel_out;
            for (std::size_t i = 0; i < rx.size(); ++i) {
                rx.x[i] += sigma_q * burst.noise_x[i];
                rx.y[i] += sigma_q * burst.noise_y[i];
            }
            auto rec = dsp::rx_chain(rx, chain_, &burst.tx);
            tx_all.x.insert(tx_all.x.end(), burst.tx.x.begin(), burst.tx.x.end());
            tx_all.y.insert(tx_all.y.end(), burst.tx.y.begin(), burst.tx.y.end());
            rec_all.x.insert(rec_all.x.end(), rec.x.begin(), rec.x.end());
            rec_all.y.insert(rec_all.y.end(), rec.y.begin(), rec.y.end());
        }
        auto gmi = metrics::gmi_estimate(tx_all, rec_all, bursts_.front().constellation);
        res.gmi_bits_2d = gmi.gmi_bits_per_2d;
        res.confidence = gmi.confidence_half_width;
        res.evm_db = metrics::evm_db(tx_all, rec_all);
        return res;
    }

    double phi_bar() const { return chain_.phi_bar; }

  private:
    struct Burst {
        sigkit::SymbolFrame tx;
        metrics::Constellation constellation;
        sigkit::DualPolSignal channel_out;
        sigkit::cvec noise_x, noise_y;
    };
    LinkConfig cfg_;
    double p_watt_;
    dsp::ChainConfig chain_;
    std::vector<Burst> bursts_;
};

// ---------------------------------------------------------------------------

struct LossSearchResult {
    double loss_db = 0.0;
    double gmi_at_loss = 0.0;
    double confidence = 0.0;
};

// Largest free-space loss at which the target GMI is still met, for a
// fixed launch power. Monotone bisection in the dB domain with common
// random numbers; bracket grown geometrically from 0 dB.
inline LossSearchResult acceptable_link_loss(const LinkConfig& cfg, double p_dbm,
                                             std::uint64_t point_index = 0) {
    PointEvaluator eval(cfg, p_dbm, point_index);
    auto gmi_at = [&](double loss) { return eval.evaluate(loss).gmi_bits_2d; };
    const auto at_zero = eval.evaluate(0.0);
    if (at_zero.gmi_bits_2d < cfg.target_gmi)
        throw InfeasibleError("target GMI unreachable even at 0 dB link loss at this power");
    // Bracket seeded from the linear-budget loss at the Gaussian-capacity
    // SNR threshold for the target rate, +/- 6 dB; geometric growth as a
    // fallback when the nonlinear penalty moves the crossing outside it.
    const double snr_req_db =
        units::linear_to_db(std::pow(2.0, cfg.target_gmi) - 1.0);
    const double est = at_zero.snr_db - snr_req_db;
    double lo = std::clamp(est - 6.0, 0.0, 294.0), hi = lo + 12.0;
    if (lo > 0.0 && gmi_at(lo) < cfg.target_gmi) {
        hi = lo;
        lo = 0.0;
    }
    while (gmi_at(hi) >= cfg.target_gmi) {
        lo = hi;
        hi += 12.0;
        if (hi > 300.0) throw std::runtime_error("acceptable_link_loss: bracket growth failed");
    }
    while (hi - lo > 0.1) {
        const double mid = 0.5 * (lo + hi);
        if (gmi_at(mid) >= cfg.target_gmi)
            lo = mid;
        else
            hi = mid;
    }
    LossSearchResult out;
    out.loss_db = 0.5 * (lo + hi);
    const auto res = eval.evaluate(out.loss_db);
    out.gmi_at_loss = res.gmi_bits_2d;
    out.confidence = res.confidence;
    return out;
}

struct MaxLossResult {
    double loss_db = 0.0;
    double optimal_power_dbm = 0.0;
    bool peak_at_grid_edge = false;
    std::vector<double> per_power_loss_db;  // aligned with the power grid
};

// Peak acceptable loss over the launch-power grid.
inline MaxLossResult max_acceptable_link_loss(const LinkConfig& cfg) {
    MaxLossResult out;
    out.loss_db = -1.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < cfg.power_grid_dbm.size(); ++i) {
        double loss;
        try {
            loss = acceptable_link_loss(cfg, cfg.power_grid_dbm[i], i).loss_db;
        } catch (const InfeasibleError&) {
            loss = -1.0;  // infeasible point, recorded and skipped
        }
        out.per_power_loss_db.push_back(loss);
        if (loss > out.loss_db) {
            out.loss_db = loss;
            best = i;
        }
    }
    if (out.loss_db < 0.0)
        throw InfeasibleError("target GMI unreachable across the whole power grid");
    out.optimal_power_dbm = cfg.power_grid_dbm[best];
    out.peak_at_grid_edge = (best == 0 || best + 1 == cfg.power_grid_dbm.size());
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps.

enum class SweepAxis { power, kappa, block_length, baud, p_nl };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "power") return SweepAxis::power;
    if (s == "kappa") return SweepAxis::kappa;
    if (s == "block_length") return SweepAxis::block_length;
    if (s == "baud") return SweepAxis::baud;
    if (s == "p_nl") return SweepAxis::p_nl;
    throw ConfigError("sweep.axis", "expected power | kappa | block_length | baud | p_nl");
}

struct SweepPoint {
    double axis_value = 0.0;
    bool ok = false;
    std::string error;
    double loss_db = 0.0;
    double optimal_power_dbm = 0.0;
};

struct SweepResult {
    SweepAxis axis;
    std::vector<SweepPoint> points;
};

inline SweepResult sweep(const LinkConfig& base, SweepAxis axis, const std::vector<double>& grid) {
    SweepResult out;
    out.axis = axis;
    std::uint64_t point_index = 1000;
    for (double v : grid) {
        LinkConfig cfg = base;
        switch (axis) {
            case SweepAxis::power:
                break;  // handled below: one acceptable-loss evaluation at P = v
            case SweepAxis::kappa:
                cfg.nlpc_enabled = true;
                cfg.kappa = v;
                break;
            case SweepAxis::block_length:
                cfg.shaping.kind = ShapingSpec::Kind::sphere;
                cfg.shaping.block_length = static_cast<int>(v);
                cfg.shaping.input_bits = static_cast<int>(
                    std::floor(cfg.shaping.dm_rate * v));
                break;
            case SweepAxis::baud:
                cfg.baud = v;
                // Fixed information throughput: the per-symbol target scales
                // inversely with the symbol rate.
                cfg.target_gmi = base.target_gmi * base.baud / v;
                break;
            case SweepAxis::p_nl:
                cfg.p_nl_dbm = v;
                break;
        }
        SweepPoint pt;
        pt.axis_value = v;
        try {
            if (axis == SweepAxis::power) {
                pt.loss_db = acceptable_link_loss(cfg, v, point_index).loss_db;
                pt.optimal_power_dbm = v;
            } else {
                auto r = max_acceptable_link_loss(cfg);
                pt.loss_db = r.loss_db;
                pt.optimal_power_dbm = r.optimal_power_dbm;
            }
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        out.points.push_back(pt);
        point_index += 1000;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Records.

inline json metrics_record(const PointEvaluator::Result& r, double obw_hz, const LinkConfig& cfg,
                           const json& raw_config) {
    return json{{"gmi_bits_2d", r.gmi_bits_2d}, {"snr_db", r.snr_db},
                {"evm_db", r.evm_db},           {"obw_hz", obw_hz},
                {"seeds", {cfg.seed}},          {"config_hash", config_hash(raw_config)}};
}

inline json sweep_record(const SweepResult& r, const LinkConfig& cfg, const json& raw_config) {
    json pts = json::array();
    for (const auto& p : r.points) {
        json jp{{"axis_value", p.axis_value}, {"ok", p.ok}};
        if (p.ok) {
            jp["loss_db"] = p.loss_db;
            jp["optimal_power_dbm"] = p.optimal_power_dbm;
        } else {
            jp["error"] = p.error;
        }
        pts.push_back(jp);
    }
    return json{{"points", pts}, {"seed", cfg.seed}, {"config_hash", config_hash(raw_config)}};
}

}  // namespace uplink::harness
