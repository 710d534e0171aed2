#include "acbridge/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace acbridge {
namespace {

constexpr std::array<std::pair<int, int>, pair_count> pair_nodes{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

using Vec = Eigen::Matrix<double, 12, 1>;
using Mat = Eigen::Matrix<double, 12, 12>;

NetworkEdges edges_from_params(const Vec& theta) {
  NetworkEdges e;
  for (std::size_t p = 0; p < pair_count; ++p)
    e.z[p] = Impedance(std::exp(complex(theta[2 * p], theta[2 * p + 1])));
  return e;
}

Vec params_from_edges(const NetworkEdges& e) {
  Vec theta;
  for (std::size_t p = 0; p < pair_count; ++p) {
    const complex w = std::log(e.z[p].value());
    theta[2 * p] = w.real();
    theta[2 * p + 1] = w.imag();
  }
  return theta;
}

struct Evaluation {
  Vec residual;
  Mat jacobian;
};

// Relative residuals (model - meas) / |meas| and, optionally, their Jacobian in
// (ln|Z|, arg Z). d Z_ij / d ln z_e = (dv_e)^2 * y_e for a unit injection i -> j.
Evaluation evaluate(const Vec& theta, const CalibrationMeasurements& meas, bool with_jacobian) {
  const NetworkEdges edges = edges_from_params(theta);
  std::array<complex, pair_count> y;
  for (std::size_t e = 0; e < pair_count; ++e) y[e] = edges.z[e].admittance();
  Evaluation out;
  out.jacobian.setZero();
  for (std::size_t p = 0; p < pair_count; ++p) {
    const auto [i, j] = pair_nodes[p];
    const UnitInjection inj = unit_injection(edges, i, j);
    if (inj.z.is_open()) throw Error(ErrorCode::singular_network, "terminals disconnected");
    const complex m = meas.z_meas[p].value();
    const double scale = 1.0 / std::abs(m);
    const complex res = (inj.z.value() - m) * scale;
    out.residual[2 * p] = res.real();
    out.residual[2 * p + 1] = res.imag();
    if (!with_jacobian) continue;
    for (std::size_t e = 0; e < pair_count; ++e) {
      const auto [a, b] = pair_nodes[e];
      const complex dv = inj.v[a] - inj.v[b];
      const complex g = dv * dv * y[e] * scale;
      out.jacobian(2 * p, 2 * e) = g.real();
      out.jacobian(2 * p, 2 * e + 1) = -g.imag();
      out.jacobian(2 * p + 1, 2 * e) = g.imag();
      out.jacobian(2 * p + 1, 2 * e + 1) = g.real();
    }
  }
  if (!out.residual.allFinite()) throw Error(ErrorCode::singular_network, "non-finite residual");
  return out;
}

double condition_number(const Mat& j) {
  Eigen::JacobiSVD<Mat> svd(j);
  const auto& s = svd.singularValues();
  if (s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

}  // namespace

TerminalPair::TerminalPair(int a, int b) : i_(std::min(a, b)), j_(std::max(a, b)) {
  if (a == b || a < 0 || b < 0 || a > 3 || b > 3)
    throw Error(ErrorCode::invalid_argument, "terminal pair needs two distinct terminals in 0..3");
}

std::size_t TerminalPair::index() const {
  for (std::size_t p = 0; p < pair_count; ++p)
    if (pair_nodes[p].first == i_ && pair_nodes[p].second == j_) return p;
  return pair_count;  // unreachable for a constructed pair
}

std::string TerminalPair::label() const { return std::to_string(i_) + std::to_string(j_); }

TerminalPair TerminalPair::from_index(std::size_t index) {
  if (index >= pair_count) throw Error(ErrorCode::invalid_argument, "pair index out of range");
  return {pair_nodes[index].first, pair_nodes[index].second};
}

std::optional<TerminalPair> TerminalPair::parse(const std::string& tag) {
  std::string digits;
  for (char ch : tag) {
    if (ch >= '0' && ch <= '9') digits.push_back(ch);
    else if (ch != '-' && ch != ',' && ch != '{' && ch != '}' && ch != ' ' && ch != '"') return std::nullopt;
  }
  if (digits.size() != 2) return std::nullopt;
  const int a = digits[0] - '0', b = digits[1] - '0';
  if (a == b || a > 3 || b > 3) return std::nullopt;
  return TerminalPair(a, b);
}

void NetworkEdges::validate() const {
  for (std::size_t p = 0; p < pair_count; ++p) {
    if (z[p].is_open()) continue;
    if (!z[p].is_finite()) throw Error(ErrorCode::invalid_argument, "edge " + TerminalPair::from_index(p).label() + " is not finite");
    if (z[p].value() == complex(0.0, 0.0))
      throw Error(ErrorCode::zero_impedance, "edge " + TerminalPair::from_index(p).label() + " is a short circuit");
  }
}

void CalibrationMeasurements::validate(double passivity_tolerance) const {
  if (!(f > 0.0)) throw Error(ErrorCode::invalid_argument, "measurement frequency must be positive");
  for (std::size_t p = 0; p < pair_count; ++p) {
    const std::string name = TerminalPair::from_index(p).label();
    if (!z_meas[p].is_finite()) throw Error(ErrorCode::invalid_argument, "measurement " + name + " must be finite");
    if (z_meas[p].value() == complex(0.0, 0.0)) throw Error(ErrorCode::zero_impedance, "measurement " + name + " is zero");
    if (z_meas[p].re() < -passivity_tolerance * z_meas[p].magnitude())
      throw Error(ErrorCode::invalid_argument, "measurement " + name + " violates passivity (Re < 0)");
  }
}

UnitInjection unit_injection(const NetworkEdges& edges, int i, int j) {
  const TerminalPair ij(i, j);
  edges.validate();
  std::array<complex, pair_count> y;
  for (std::size_t e = 0; e < pair_count; ++e) y[e] = edges.z[e].admittance();

  // nodes reachable from i through non-open edges
  std::array<bool, 4> reach{};
  reach[i] = true;
  for (int sweep = 0; sweep < 3; ++sweep)
    for (std::size_t e = 0; e < pair_count; ++e) {
      if (y[e] == complex(0.0, 0.0)) continue;
      const auto [a, b] = pair_nodes[e];
      if (reach[a] || reach[b]) reach[a] = reach[b] = true;
    }
  UnitInjection out;
  if (!reach[j]) {
    out.z = Impedance::open();
    return out;
  }

  std::array<int, 4> slot{-1, -1, -1, -1};
  int n = 0;
  for (int node = 0; node < 4; ++node)
    if (reach[node] && node != j) slot[node] = n++;
  Eigen::MatrixXcd lap = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t e = 0; e < pair_count; ++e) {
    const auto [a, b] = pair_nodes[e];
    if (!reach[a]) continue;
    if (slot[a] >= 0) lap(slot[a], slot[a]) += y[e];
    if (slot[b] >= 0) lap(slot[b], slot[b]) += y[e];
    if (slot[a] >= 0 && slot[b] >= 0) {
      lap(slot[a], slot[b]) -= y[e];
      lap(slot[b], slot[a]) -= y[e];
    }
  }
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(slot[i]) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(lap);
  if (!lu.isInvertible()) throw Error(ErrorCode::singular_network, "reduced Laplacian is singular");
  const Eigen::VectorXcd v = lu.solve(rhs);
  for (int node = 0; node < 4; ++node) out.v[node] = slot[node] >= 0 ? v(slot[node]) : complex(0.0, 0.0);
  out.z = Impedance(out.v[i] - out.v[j]);
  return out;
}

// Evaluated in canonical terminal order so (i, j) and (j, i) agree bit for bit.
Impedance pairwise_measured(const NetworkEdges& edges, int i, int j) {
  return unit_injection(edges, std::min(i, j), std::max(i, j)).z;
}

NetworkEdges default_initial_guess(const CalibrationMeasurements& meas) {
  NetworkEdges e;
  for (std::size_t p = 0; p < pair_count; ++p) e.z[p] = Impedance(2.0 * meas.z_meas[p].value());
  return e;
}

NetworkSolution solve_network(const CalibrationMeasurements& meas, const SolverOptions& options) {
  return solve_network(meas, default_initial_guess(meas), options);
}

NetworkSolution solve_network(const CalibrationMeasurements& meas, const NetworkEdges& initial, const SolverOptions& options) {
  meas.validate();
  for (const Impedance& z : initial.z)
    if (!z.is_finite() || z.value() == complex(0.0, 0.0))
      throw Error(ErrorCode::invalid_argument, "initial edges must be finite and non-zero");

  constexpr double max_radius = 10.0;
  constexpr double eta = 1e-4;

  Vec theta = params_from_edges(initial);
  Evaluation ev = evaluate(theta, meas, true);
  double norm = ev.residual.norm();
  double radius = options.initial_radius;

  SolverReport report;
  report.residual_history.push_back(norm);
  int iter = 0;
  for (; iter < options.max_iter && norm > options.tolerance; ++iter) {
    const Mat& jac = ev.jacobian;
    const Vec& r = ev.residual;
    Eigen::FullPivLU<Mat> lu(jac);
    if (!lu.isInvertible()) {
      report.status = SolverStatus::singular_jacobian;
      break;
    }
    const Vec p_gn = -lu.solve(r);
    const Vec g = jac.transpose() * r;
    const double jg = (jac * g).squaredNorm();
    const Vec p_cauchy = jg > 0.0 ? Vec(-(g.squaredNorm() / jg) * g) : Vec(Vec::Zero());

    Vec step;
    if (p_gn.norm() <= radius) {
      step = p_gn;
    } else if (p_cauchy.norm() >= radius) {
      step = -(radius / g.norm()) * g;
    } else {
      // largest tau in [0,1] with |p_c + tau (p_gn - p_c)| = radius
      const Vec d = p_gn - p_cauchy;
      const double a = d.squaredNorm();
      const double b = 2.0 * p_cauchy.dot(d);
      const double c = p_cauchy.squaredNorm() - radius * radius;
      const double tau = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
      step = p_cauchy + tau * d;
    }

    const double f0 = 0.5 * norm * norm;
    const double predicted = f0 - 0.5 * (r + jac * step).squaredNorm();
    const Vec trial = theta + step;
    double rho = -1.0;
    std::optional<Evaluation> trial_ev;
    try {
      Evaluation te = evaluate(trial, meas, false);
      const double actual = f0 - 0.5 * te.residual.squaredNorm();
      rho = predicted > 0.0 ? actual / predicted : -1.0;
      if (actual > 0.0 && rho > eta) trial_ev = std::move(te);
    } catch (const Error&) {
      rho = -1.0;
    }

    const double step_norm = step.norm();
    if (rho < 0.25) radius = 0.25 * step_norm;
    else if (rho > 0.75 && step_norm >= 0.99 * radius) radius = std::min(2.0 * radius, max_radius);

    if (trial_ev) {
      theta = trial;
      ev = evaluate(theta, meas, true);
      norm = ev.residual.norm();
      report.residual_history.push_back(norm);
    }
    if (radius < 1e-14 * (1.0 + theta.norm())) break;
  }

  report.iterations = iter;
  report.residual_norm = norm;
  report.converged = norm <= options.tolerance;
  if (report.converged) report.status = SolverStatus::converged;
  else if (report.status != SolverStatus::singular_jacobian) report.status = SolverStatus::not_converged;
  report.condition_estimate = condition_number(ev.jacobian);
  return {edges_from_params(theta), report};
}

BridgeFromEdges bridge_config_from_edges(const NetworkEdges& edges, double v_hat, double f_gen) {
  BridgeFromEdges out;
  out.bridge.z1 = edges[TerminalPair(1, 2)];
  out.bridge.z2 = edges[TerminalPair(1, 3)];
  out.bridge.z3 = edges[TerminalPair(0, 3)];
  out.bridge.zm = edges[TerminalPair(2, 3)];
  out.bridge.v_hat = v_hat;
  out.bridge.f_gen = f_gen;
  out.open_hint = edges[TerminalPair(0, 2)];
  return out;
}

}  // namespace acbridge
