// Command-line front end: simulate | sweep | psd | shaping-table | pnl.
//
// Exit codes: 0 success, 2 config error, 3 infeasible target, 4 numerical
// failure.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uplink/analytics.hpp"
#include "uplink/channel.hpp"
#include "uplink/dsp.hpp"
#include "uplink/harness.hpp"
#include "uplink/metrics.hpp"
#include "uplink/shaping.hpp"
#include "uplink/sigkit.hpp"
#include "uplink/units.hpp"

namespace {

using json = nlohmann::json;
using namespace uplink;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw harness::ConfigError("config", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw harness::ConfigError("config", std::string("parse failure: ") + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// freq_hz,psd_x_db,psd_y_db rows sorted by frequency.
std::string psd_csv(const std::vector<double>& freq, const std::vector<double>& px,
                    const std::vector<double>& py) {
    std::vector<std::size_t> order(freq.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return freq[a] < freq[b]; });
    std::ostringstream ss;
    ss.precision(12);
    ss << "freq_hz,psd_x_db,psd_y_db\n";
    for (std::size_t i : order)
        ss << freq[i] << ',' << units::linear_to_db(std::max(px[i], 1e-300)) << ','
           << units::linear_to_db(std::max(py[i], 1e-300)) << '\n';
    return ss.str();
}

// Noiseless channel output of one burst, for spectra and bandwidth numbers.
sigkit::DualPolSignal propagated_burst(const harness::LinkConfig& cfg, double p_watt,
                                       std::uint64_t burst_index) {
    auto rng = harness::substream(cfg.seed, 0, burst_index);
    auto shaped = harness::generate_burst(cfg.shaping, cfg.symbols_per_burst, rng);
    auto chain = cfg.chain(p_watt);
    auto sig = dsp::tx_chain(shaped.frame, chain, p_watt);
    if (cfg.use_ssfm)
        return channel::ssfm_propagate(sig, cfg.segments, p_watt, channel::SsfmSettings{});
    return channel::zero_dispersion_propagate(sig, chain.phi_bar);
}

int run_pnl(const std::string& config_path, double length_m, double gamma_per_w_km,
            double alpha_db_km) {
    double p_nl_watt;
    std::vector<double> powers{30.0};
    if (!config_path.empty()) {
        auto cfg = harness::parse_config(load_config(config_path));
        p_nl_watt = cfg.p_nl_watt();
        powers = cfg.power_grid_dbm;
    } else {
        auto seg = channel::passive_segment(length_m, gamma_per_w_km, alpha_db_km);
        p_nl_watt = channel::characteristic_nonlinear_power({seg});
    }
    std::cout.precision(6);
    std::cout << "P_NL = " << units::watt_to_dbm(p_nl_watt) << " dBm\n";
    for (double p : powers)
        std::cout << "phi_bar(P = " << p << " dBm) = "
                  << units::dbm_to_watt(p) / p_nl_watt << " rad\n";
    return kExitOk;
}

int run_simulate(const std::string& config_path, double loss_db, double power_dbm,
                 bool find_loss, double obw_threshold_db, const std::string& out_path,
                 const std::string& dump_signal_path) {
    const json raw = load_config(config_path);
    auto cfg = harness::parse_config(raw);
    const double p_dbm = std::isfinite(power_dbm) ? power_dbm : cfg.power_grid_dbm.front();

    harness::PointEvaluator eval(cfg, p_dbm, 0);
    if (find_loss) loss_db = harness::acceptable_link_loss(cfg, p_dbm).loss_db;
    auto res = eval.evaluate(loss_db);
    const auto fiber_out = propagated_burst(cfg, units::dbm_to_watt(p_dbm), 0);
    const double obw = metrics::occupied_bandwidth(fiber_out, obw_threshold_db);
    if (!dump_signal_path.empty()) sigkit::write_signal(fiber_out, dump_signal_path);

    json rec = harness::metrics_record(res, obw, cfg, raw);
    rec["loss_db"] = loss_db;
    rec["launch_power_dbm"] = p_dbm;
    rec["confidence_bits_2d"] = res.confidence;
    write_text(out_path, rec.dump(2) + "\n");
    return kExitOk;
}

int run_sweep(const std::string& config_path, const std::string& axis_name,
              std::vector<double> grid, const std::string& out_path,
              const std::string& csv_path) {
    const json raw = load_config(config_path);
    auto cfg = harness::parse_config(raw);
    const auto axis = harness::sweep_axis_from_string(axis_name);
    if (grid.empty()) throw harness::ConfigError("sweep.grid", "must be nonempty");

    auto result = harness::sweep(cfg, axis, grid);
    write_text(out_path, harness::sweep_record(result, cfg, raw).dump(2) + "\n");
    if (!csv_path.empty()) {
        std::ostringstream ss;
        ss.precision(12);
        ss << "axis_value,loss_db,optimal_power_dbm\n";
        for (const auto& p : result.points)
            if (p.ok) ss << p.axis_value << ',' << p.loss_db << ',' << p.optimal_power_dbm << '\n';
        write_text(csv_path, ss.str());
    }
    const bool any_ok =
        std::any_of(result.points.begin(), result.points.end(), [](const auto& p) { return p.ok; });
    if (!any_ok) throw harness::InfeasibleError("every sweep point failed");
    return kExitOk;
}

int run_psd(const std::string& config_path, double power_dbm, const std::string& analytic_path,
            const std::string& mc_path, int mc_bursts, std::size_t lag_count) {
    auto cfg = harness::parse_config(load_config(config_path));
    const double p_dbm = std::isfinite(power_dbm) ? power_dbm : cfg.power_grid_dbm.front();
    const double p_watt = units::dbm_to_watt(p_dbm);
    const double phi_bar = p_watt / cfg.p_nl_watt();

    if (!analytic_path.empty()) {
        sigkit::PulseShape pulse(cfg.roll_off, 1.0 / cfg.baud);
        auto r0 = analytics::input_autocorrelation_from_pulse(pulse, lag_count, cfg.n);
        auto evolved = analytics::evolve_autocorrelation(r0, phi_bar);
        auto psd = analytics::psd_from_autocorrelation(evolved);
        if (psd.negative_excursion)
            std::cerr << "warning: analytic spectrum has a negative excursion\n";
        write_text(analytic_path, psd_csv(psd.freq_hz, psd.psd, psd.psd));
    }
    if (!mc_path.empty()) {
        sigkit::PsdEstimate acc;
        for (int b = 0; b < mc_bursts; ++b) {
            auto out = propagated_burst(cfg, p_watt, static_cast<std::uint64_t>(b));
            auto one = sigkit::estimate_psd(out, out.size());
            sigkit::accumulate_psd(acc, one, static_cast<std::size_t>(mc_bursts));
        }
        write_text(mc_path, psd_csv(acc.freq_hz, acc.psd_x, acc.psd_y));
    }
    return kExitOk;
}

int run_shaping_table(int levels_per_dim, int block_length, int input_bits,
                      const std::string& csv_path, const std::string& meta_path) {
    if (levels_per_dim < 2 || (levels_per_dim & 1))
        throw harness::ConfigError("shaping.levels_per_dim", "must be even >= 2");
    shaping::AmplitudeAlphabet alpha(levels_per_dim / 2);
    shaping::LutDm dm(alpha, block_length, input_bits);

    std::ostringstream ss;
    ss << "address";
    for (int i = 1; i <= dm.block_length(); ++i) ss << ",a" << i;
    ss << '\n';
    for (std::uint64_t addr = 0; addr < dm.table_size(); ++addr) {
        ss << addr;
        for (int a : dm.row(addr)) ss << ',' << a;
        ss << '\n';
    }
    write_text(csv_path, ss.str());

    json meta{{"alphabet", alpha.levels},
              {"input_bits", dm.input_bits()},
              {"block_length", dm.block_length()},
              {"table_size", dm.table_size()},
              {"max_energy", dm.max_energy()}};
    write_text(meta_path, meta.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coherent optical uplink simulator"};
    app.require_subcommand(1);

    // pnl
    auto* pnl = app.add_subcommand("pnl", "print the characteristic nonlinear power and phi_bar");
    std::string pnl_config;
    double pnl_len = 43.0, pnl_gamma = 1.27, pnl_alpha = 0.2;
    pnl->add_option("--config", pnl_config, "link config JSON (overrides the span options)");
    pnl->add_option("--length-m", pnl_len, "passive span length, m");
    pnl->add_option("--gamma-per-w-km", pnl_gamma, "nonlinear coefficient, 1/W/km");
    pnl->add_option("--alpha-db-km", pnl_alpha, "attenuation, dB/km");

    // simulate
    auto* sim = app.add_subcommand("simulate", "evaluate one link point and emit a metrics record");
    std::string sim_config, sim_out, sim_dump;
    double sim_loss = 0.0, sim_power = std::numeric_limits<double>::quiet_NaN();
    double sim_obw_threshold = 20.0;
    bool sim_find_loss = false;
    sim->add_option("--config", sim_config, "link config JSON")->required();
    sim->add_option("--loss-db", sim_loss, "free-space link loss, dB");
    sim->add_option("--power-dbm", sim_power, "launch power (default: first grid entry)");
    sim->add_flag("--find-loss", sim_find_loss, "evaluate at the acceptable-loss point instead");
    sim->add_option("--obw-threshold-db", sim_obw_threshold, "occupied-bandwidth threshold below peak");
    sim->add_option("-o,--output", sim_out, "metrics record path (default: stdout)");
    sim->add_option("--dump-signal", sim_dump,
                    "write the post-fiber waveform as interleaved f64 with a JSON sidecar");

    // sweep
    auto* swp = app.add_subcommand("sweep", "max acceptable link loss along one axis");
    std::string swp_config, swp_axis, swp_out, swp_csv;
    std::vector<double> swp_grid;
    swp->add_option("--config", swp_config, "link config JSON")->required();
    swp->add_option("--axis", swp_axis, "power | kappa | block_length | baud | p_nl")->required();
    swp->add_option("--grid", swp_grid, "axis values")->required()->expected(-1);
    swp->add_option("-o,--output", swp_out, "sweep record path (default: stdout)");
    swp->add_option("--csv", swp_csv, "also write axis_value,loss_db,optimal_power_dbm");

    // psd
    auto* psd = app.add_subcommand("psd", "analytic and Monte-Carlo power spectra");
    std::string psd_config, psd_analytic, psd_mc;
    double psd_power = std::numeric_limits<double>::quiet_NaN();
    int psd_bursts = 64;
    std::size_t psd_lags = std::size_t{1} << 16;
    psd->add_option("--config", psd_config, "link config JSON")->required();
    psd->add_option("--power-dbm", psd_power, "launch power (default: first grid entry)");
    psd->add_option("--analytic-out", psd_analytic, "analytic spectrum CSV path");
    psd->add_option("--mc-out", psd_mc, "Monte-Carlo spectrum CSV path");
    psd->add_option("--mc-bursts", psd_bursts, "bursts to average");
    psd->add_option("--lag-count", psd_lags, "analytic lag-grid size");

    // shaping-table
    auto* tab = app.add_subcommand("shaping-table", "export a sphere-shaping lookup table");
    int tab_levels = 8, tab_block = 4, tab_bits = 5;
    std::string tab_csv, tab_meta = "-";
    tab->add_option("--levels-per-dim", tab_levels, "QAM levels per quadrature");
    tab->add_option("--block-length", tab_block, "amplitudes per codeword");
    tab->add_option("--input-bits", tab_bits, "address width, bits");
    tab->add_option("--csv", tab_csv, "table CSV path")->required();
    tab->add_option("--meta", tab_meta, "metadata JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*pnl) return run_pnl(pnl_config, pnl_len, pnl_gamma, pnl_alpha);
        if (*sim)
            return run_simulate(sim_config, sim_loss, sim_power, sim_find_loss,
                                sim_obw_threshold, sim_out, sim_dump);
        if (*swp) return run_sweep(swp_config, swp_axis, swp_grid, swp_out, swp_csv);
        if (*psd)
            return run_psd(psd_config, psd_power, psd_analytic, psd_mc, psd_bursts, psd_lags);
        if (*tab) return run_shaping_table(tab_levels, tab_block, tab_bits, tab_csv, tab_meta);
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const harness::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
