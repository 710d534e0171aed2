#include "acbridge/circuit.hpp"

#include <cmath>

namespace acbridge {

BridgeMoebius bridge_moebius(const BridgeConfig& cfg) {
  const complex z1 = cfg.z1.value(), z2 = cfg.z2.value(), z3 = cfg.z3.value();
  if (cfg.zm.is_open()) {
    // limit zm -> inf of the loaded transform
    return {z2, -z1 * z3, z2 + z3, z1 * (z2 + z3)};
  }
  const complex zm = cfg.zm.value();
  return {
      zm * z2,
      -zm * z1 * z3,
      z1 * (z2 + z3) + z2 * z3 + zm * (z2 + z3),
      z1 * z2 * z3 + zm * z1 * (z2 + z3),
  };
}

complex bridge_ratio(const BridgeConfig& cfg, const Impedance& zx) {
  const BridgeMoebius m = bridge_moebius(cfg);
  complex num, den;
  if (zx.is_open()) {
    num = m.a;
    den = m.c;
  } else {
    const complex z = zx.value();
    num = m.a * z + m.b;
    den = m.c * z + m.d;
  }
  if (den == complex(0.0, 0.0) || !std::isfinite(std::abs(den)))
    throw Error(ErrorCode::singular_network, "bridge nodal system is singular");
  return num / den;
}

BridgeInversion invert_bridge_ratio(const BridgeConfig& cfg, complex ratio, double plausibility_bound) {
  const BridgeMoebius m = bridge_moebius(cfg);
  const complex den = m.a - m.c * ratio;
  const double scale = std::abs(m.a) + std::abs(m.c * ratio);
  if (!(std::abs(den) > 1e-12 * scale))
    throw Error(ErrorCode::non_invertible_ratio, "ratio lies at the pole of the bridge transform");
  const complex zx = (m.d * ratio - m.b) / den;
  if (!std::isfinite(zx.real()) || !std::isfinite(zx.imag()))
    throw Error(ErrorCode::non_invertible_ratio, "reconstructed impedance is not finite");
  return {Impedance(zx), std::abs(zx) > plausibility_bound};
}

Impedance voltage_divider_impedance(double v_gen, complex v_ref, const Impedance& z_ref) {
  if (v_ref == complex(0.0, 0.0)) throw Error(ErrorCode::division_by_zero, "v_ref is zero");
  return Impedance((v_gen / v_ref - 1.0) * z_ref.value());
}

Impedance open_short_correct(const Impedance& zx, const CorrectionPair& corr) {
  if (!zx.is_finite()) throw Error(ErrorCode::invalid_argument, "measured impedance must be finite");
  corr.validate();
  const complex d = zx.value() - corr.z_short.value();
  if (corr.z_open.is_open()) return Impedance(d);
  const complex den = 1.0 - d / (corr.z_open.value() - corr.z_short.value());
  if (std::abs(den) < correction_tolerance)
    throw Error(ErrorCode::correction_singular, "measured impedance equals the open condition");
  return Impedance(d / den);
}

RCEquivalent rc_from_impedance(const Impedance& z, double f) {
  if (!(f > 0.0)) throw Error(ErrorCode::invalid_argument, "frequency must be positive");
  if (z.is_open()) return {0.0, std::nullopt, f, false};
  const complex v = z.value();
  const double mag2 = std::norm(v);
  if (mag2 == 0.0) throw Error(ErrorCode::zero_impedance, "cannot extract RC from a short circuit");
  const double omega = 2.0 * pi * f;
  RCEquivalent rc;
  rc.f = f;
  rc.c = -v.imag() / (omega * mag2);
  rc.inductive = rc.c < 0.0;
  if (v.real() != 0.0) rc.r = v.real() + v.imag() * v.imag() / v.real();
  return rc;
}

double hertzian_capacitance(double area, double film_thickness, double eps_r) {
  if (!(area > 0.0) || !(film_thickness > 0.0) || !(eps_r >= 1.0))
    throw Error(ErrorCode::invalid_geometry, "need area > 0, film thickness > 0, eps_r >= 1");
  return vacuum_permittivity * eps_r * area / film_thickness;
}

double capacitance_error_bound(double f_c, double f_gen) {
  const double x = f_c / f_gen;
  return 1000.0 * x * x;
}

double limit_frequency(double max_error, double f_gen) { return f_gen * std::sqrt(max_error / 1000.0); }

}  // namespace acbridge
