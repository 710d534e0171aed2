#pragma once

#include "acbridge/impedance.hpp"

namespace acbridge {

/// Coefficients of ratio = (a*zx + b) / (c*zx + d), the bridge transfer as a
/// Moebius transform of the DUT impedance. With an OPEN probe the coefficients
/// are divided through by zm.
struct BridgeMoebius {
  complex a, b, c, d;
};

BridgeMoebius bridge_moebius(const BridgeConfig& cfg);

/// v_m / v_gen of the bridge with probe loading, v_m = v(2) - v(3).
/// zx may be OPEN (DUT removed).
complex bridge_ratio(const BridgeConfig& cfg, const Impedance& zx);

inline constexpr double default_plausibility_bound = 1e9;  // ohms

struct BridgeInversion {
  Impedance zx;
  bool implausible = false;  // |zx| above the plausibility bound
};

/// Exact closed-form inverse of bridge_ratio.
/// Throws non_invertible_ratio at the pole of the transform (ratio of an OPEN DUT).
BridgeInversion invert_bridge_ratio(const BridgeConfig& cfg, complex ratio,
                                    double plausibility_bound = default_plausibility_bound);

/// Voltage-comparison method: (v_gen / v_ref - 1) * z_ref.
Impedance voltage_divider_impedance(double v_gen, complex v_ref, const Impedance& z_ref);

inline constexpr double correction_tolerance = 1e-12;

/// Open-short de-embedding of a measured impedance.
Impedance open_short_correct(const Impedance& zx, const CorrectionPair& corr);

/// Parallel RC equivalent of z at f. Re{z} == 0 gives r = OPEN.
RCEquivalent rc_from_impedance(const Impedance& z, double f);

/// Plate capacitor of a lubricated Hertzian contact.
double hertzian_capacitance(double area, double film_thickness, double eps_r);

/// Relative peak-capacitance error for a capacitance changing at f_c under carrier f_gen.
double capacitance_error_bound(double f_c, double f_gen);

/// Highest capacitance-change frequency that keeps the error below max_error.
double limit_frequency(double max_error, double f_gen);

}  // namespace acbridge
