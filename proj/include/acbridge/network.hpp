#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acbridge/impedance.hpp"

namespace acbridge {

/// Unordered pair of bridge terminals {0,1,2,3}; stored with i < j.
class TerminalPair {
 public:
  TerminalPair(int a, int b);

  int i() const { return i_; }
  int j() const { return j_; }
  /// Position in the canonical order 01, 02, 03, 12, 13, 23.
  std::size_t index() const;
  std::string label() const;  // "01", "23", ...

  static TerminalPair from_index(std::size_t index);
  /// Parses "01", "0-1", "{0,1}" style tags; nullopt when malformed.
  static std::optional<TerminalPair> parse(const std::string& tag);

  friend bool operator==(const TerminalPair&, const TerminalPair&) = default;

 private:
  int i_;
  int j_;
};

inline constexpr std::size_t pair_count = 6;

/// The six edge impedances of the assembled four-terminal bridge (K4 graph).
struct NetworkEdges {
  std::array<Impedance, pair_count> z{};

  Impedance& operator[](TerminalPair p) { return z[p.index()]; }
  const Impedance& operator[](TerminalPair p) const { return z[p.index()]; }
  void validate() const;
};

/// Six two-terminal driving-point measurements taken at frequency f.
struct CalibrationMeasurements {
  std::array<Impedance, pair_count> z_meas{};
  double f = 0.0;

  Impedance& operator[](TerminalPair p) { return z_meas[p.index()]; }
  const Impedance& operator[](TerminalPair p) const { return z_meas[p.index()]; }
  void validate(double passivity_tolerance = 1e-9) const;
};

/// Driving-point impedance between terminals i and j of the K4 network, from a
/// reduced-Laplacian nodal solve. OPEN when i and j are not connected.
Impedance pairwise_measured(const NetworkEdges& edges, int i, int j);

/// Same, together with the node voltages for a unit current injected at i and
/// drawn at j (v_j = 0). Used for the analytic solver Jacobian.
struct UnitInjection {
  Impedance z;
  std::array<complex, 4> v{};
};
UnitInjection unit_injection(const NetworkEdges& edges, int i, int j);

enum class SolverStatus { converged, not_converged, singular_jacobian };

struct SolverReport {
  int iterations = 0;
  double residual_norm = 0.0;      // relative: ||(model - meas) / |meas| ||_2
  bool converged = false;
  double condition_estimate = 0.0; // 2-norm condition of the Jacobian at the solution
  SolverStatus status = SolverStatus::not_converged;
  std::vector<double> residual_history;  // initial value, then one entry per accepted step
};

struct SolverOptions {
  int max_iter = 200;
  double tolerance = 1e-12;        // on the relative residual norm
  double initial_radius = 1.0;     // trust radius in (ln|Z|, arg Z) units
};

struct NetworkSolution {
  NetworkEdges edges;
  SolverReport report;
};

/// Recovers the six edges from six pairwise measurements with a Powell dogleg
/// trust-region iteration on (ln|Z|, arg Z) per edge. Non-convergence returns
/// the best iterate with report.converged == false.
NetworkSolution solve_network(const CalibrationMeasurements& meas, const NetworkEdges& initial,
                              const SolverOptions& options = {});
/// Initial guess 2 * z_meas per edge.
NetworkSolution solve_network(const CalibrationMeasurements& meas, const SolverOptions& options = {});

NetworkEdges default_initial_guess(const CalibrationMeasurements& meas);

struct BridgeFromEdges {
  BridgeConfig bridge;
  Impedance open_hint;  // Z02, parallel to the DUT; usable as z_open
};

/// Z12 -> z1, Z13 -> z2, Z03 -> z3, Z23 -> zm; Z02 is the open hint; Z01 sits
/// across the source and drops out.
BridgeFromEdges bridge_config_from_edges(const NetworkEdges& edges, double v_hat, double f_gen);

}  // namespace acbridge
