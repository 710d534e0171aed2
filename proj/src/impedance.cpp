#include "acbridge/impedance.hpp"

#include <cmath>

namespace acbridge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::singular_network: return "SingularNetwork";
    case ErrorCode::non_invertible_ratio: return "NonInvertibleRatio";
    case ErrorCode::division_by_zero: return "DivisionByZero";
    case ErrorCode::correction_singular: return "CorrectionSingular";
    case ErrorCode::zero_impedance: return "ZeroImpedance";
    case ErrorCode::invalid_geometry: return "InvalidGeometry";
    case ErrorCode::quadrature_grid_mismatch: return "QuadratureGridMismatch";
    case ErrorCode::generator_absent: return "GeneratorAbsent";
    case ErrorCode::not_converged: return "NotConverged";
    case ErrorCode::singular_jacobian: return "SingularJacobian";
    case ErrorCode::integration_diverged: return "IntegrationDiverged";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

bool Impedance::is_finite() const {
  return !open_ && std::isfinite(re_) && std::isfinite(im_);
}

complex Impedance::value() const {
  if (open_) throw Error(ErrorCode::invalid_argument, "OPEN impedance has no finite value");
  return {re_, im_};
}

complex Impedance::admittance() const {
  if (open_) return {0.0, 0.0};
  if (re_ == 0.0 && im_ == 0.0) throw Error(ErrorCode::zero_impedance, "short circuit has no finite admittance");
  return 1.0 / complex(re_, im_);
}

Impedance parallel_rc(std::optional<double> r, double c, double f) {
  if (f <= 0.0) throw Error(ErrorCode::invalid_argument, "frequency must be positive");
  const complex y = complex(r ? 1.0 / *r : 0.0, 2.0 * pi * f * c);
  if (y == complex(0.0, 0.0)) return Impedance::open();
  return Impedance(1.0 / y);
}

Impedance parallel(const Impedance& a, const Impedance& b) {
  if (a.is_open()) return b;
  if (b.is_open()) return a;
  const complex za = a.value(), zb = b.value();
  const complex sum = za + zb;
  if (sum == complex(0.0, 0.0)) throw Error(ErrorCode::singular_network, "parallel resonance: za + zb = 0");
  return Impedance(za * zb / sum);
}

Impedance series(const Impedance& a, const Impedance& b) {
  if (a.is_open() || b.is_open()) return Impedance::open();
  return Impedance(a.value() + b.value());
}

Impedance RCEquivalent::impedance() const { return parallel_rc(r, c, f); }

void CorrectionPair::validate() const {
  if (!z_short.is_finite()) throw Error(ErrorCode::invalid_argument, "z_short must be finite");
  if (z_open.is_open()) return;
  if (!z_open.is_finite()) throw Error(ErrorCode::invalid_argument, "z_open must be finite or OPEN");
  if (!(z_short.magnitude() < z_open.magnitude()))
    throw Error(ErrorCode::invalid_argument, "|z_short| must be below |z_open|");
}

void BridgeConfig::validate() const {
  if (!(f_gen > 0.0) || !std::isfinite(f_gen)) throw Error(ErrorCode::invalid_argument, "f_gen must be positive");
  if (!(v_hat > 0.0) || !std::isfinite(v_hat)) throw Error(ErrorCode::invalid_argument, "v_hat must be positive");
  if (!z1.is_finite() || !z2.is_finite() || !z3.is_finite())
    throw Error(ErrorCode::invalid_argument, "z1, z2, z3 must be finite (not OPEN)");
  if (!zm.is_open() && !zm.is_finite()) throw Error(ErrorCode::invalid_argument, "zm must be finite or OPEN");
}

}  // namespace acbridge
