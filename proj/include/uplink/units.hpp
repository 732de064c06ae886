#pragma once

// Unit conversions and physical constants shared across modules.

#include <cmath>

namespace uplink::units {

constexpr double speed_of_light = 299792458.0;   // m/s
constexpr double planck_constant = 6.62607015e-34;  // J s

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return 1e-3 * db_to_linear(dbm); }
inline double watt_to_dbm(double watt) { return linear_to_db(watt / 1e-3); }

// Fiber attenuation dB/km -> nepers/m (power attenuation coefficient).
inline double attenuation_per_m(double alpha_db_per_km) {
    return alpha_db_per_km * std::log(10.0) / 10.0 / 1000.0;
}

// Nonlinear coefficient 1/(W km) -> 1/(W m).
inline double gamma_per_w_m(double gamma_per_w_km) { return gamma_per_w_km / 1000.0; }

// Group-velocity dispersion from the dispersion parameter:
// beta2 = -D lambda^2 / (2 pi c), D in ps/(nm km).
inline double beta2_from_dispersion(double d_ps_nm_km, double lambda_m = 1550e-9) {
    const double d_si = d_ps_nm_km * 1e-6;  // s/m^2
    return -d_si * lambda_m * lambda_m / (2.0 * M_PI * speed_of_light);
}

// ps^2/km -> s^2/m.
inline double beta2_si(double beta2_ps2_km) { return beta2_ps2_km * 1e-27; }

inline double photon_energy(double lambda_m = 1550e-9) {
    return planck_constant * speed_of_light / lambda_m;
}

}  // namespace uplink::units
