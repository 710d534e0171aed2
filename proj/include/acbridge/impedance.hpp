#pragma once

#include <complex>
#include <optional>

#include "acbridge/error.hpp"

namespace acbridge {

using complex = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m

/// Complex impedance in ohms, or the distinguished OPEN (infinite) state.
///
/// OPEN never appears as a floating infinity inside arithmetic. Callers branch
/// on is_open() and use the explicit limit of whatever formula they evaluate.
class Impedance {
 public:
  constexpr Impedance() = default;
  constexpr Impedance(double re, double im) : re_(re), im_(im) {}
  explicit Impedance(complex z) : re_(z.real()), im_(z.imag()) {}

  static constexpr Impedance open() {
    Impedance z;
    z.open_ = true;
    return z;
  }

  constexpr bool is_open() const { return open_; }
  bool is_finite() const;

  /// Throws invalid_argument when OPEN.
  complex value() const;
  double re() const { return value().real(); }
  double im() const { return value().imag(); }
  double magnitude() const { return std::abs(value()); }

  /// OPEN maps to zero admittance; a zero impedance has no finite admittance
  /// and throws zero_impedance.
  complex admittance() const;

  friend bool operator==(const Impedance& a, const Impedance& b) {
    if (a.open_ || b.open_) return a.open_ == b.open_;
    return a.re_ == b.re_ && a.im_ == b.im_;
  }

 private:
  double re_ = 0.0;
  double im_ = 0.0;
  bool open_ = false;
};

/// Impedance of a parallel RC at frequency f. r == nullopt is a lossless capacitor.
Impedance parallel_rc(std::optional<double> r, double c, double f);

/// Parallel combination; OPEN is the identity element.
Impedance parallel(const Impedance& a, const Impedance& b);
/// Series combination; OPEN absorbs.
Impedance series(const Impedance& a, const Impedance& b);

struct RCEquivalent {
  double c = 0.0;               // F; negative means inductive behaviour
  std::optional<double> r;      // ohms; nullopt is OPEN (pure reactance)
  double f = 0.0;               // Hz, frequency the equivalent is valid at
  bool inductive = false;       // c < 0

  Impedance impedance() const;
};

struct CorrectionPair {
  Impedance z_open = Impedance::open();
  Impedance z_short{0.0, 0.0};

  /// |z_short| < |z_open| when both are finite, z_short finite.
  void validate() const;
};

/// Four known bridge impedances at the carrier, generator amplitude and frequency.
///
/// Terminals: 0 ground, 1 generator, 2 DUT/probe node, 3 reference/probe node.
/// z1: 1-2, z2: 1-3, z3: 3-0, zm (probe): 2-3; the DUT sits on 2-0.
struct BridgeConfig {
  Impedance z1;
  Impedance z2;
  Impedance z3;
  Impedance zm = Impedance::open();
  double v_hat = 1.0;
  double f_gen = 1.0;

  double omega() const { return 2.0 * pi * f_gen; }
  void validate() const;
};

}  // namespace acbridge
