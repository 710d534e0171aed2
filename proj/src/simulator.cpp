#include "acbridge/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "acbridge/circuit.hpp"

namespace acbridge {
namespace {

struct Element {
  double g = 0.0;  // S
  double c = 0.0;  // F
};

Element element_from(const Impedance& z, double f, const char* name) {
  if (z.is_open()) return {};
  const RCEquivalent rc = rc_from_impedance(z, f);
  if (rc.inductive)
    throw Error(ErrorCode::invalid_config, std::string("bridge element ") + name + " is inductive; the simulator models parallel RC only");
  if (rc.r && *rc.r <= 0.0)
    throw Error(ErrorCode::invalid_config, std::string("bridge element ") + name + " has non-positive resistance");
  return {rc.r ? 1.0 / *rc.r : 0.0, rc.c};
}

using Vec2 = std::array<double, 2>;

Vec2 solve2(double a, double b, double c, double d, const Vec2& rhs) {
  const double det = a * d - b * c;
  return {(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det};
}

}  // namespace

double DUTModel::capacitance(double t) const { return c0 + c_amp * std::sin(2.0 * pi * f_c * t + phase0); }

void DUTModel::validate() const {
  if (!(c0 - std::abs(c_amp) > 0.0)) throw Error(ErrorCode::invalid_config, "DUT capacitance must stay positive (c0 > |c_amp|)");
  if (!(f_c >= 0.0)) throw Error(ErrorCode::invalid_config, "DUT f_c must be non-negative");
  if (r && !(*r > 0.0)) throw Error(ErrorCode::invalid_config, "DUT resistance must be positive");
}

std::size_t SimConfig::sample_count() const {
  const double n = duration * f_s;
  return n > 0.0 ? static_cast<std::size_t>(std::llround(n)) : 0;
}

void SimConfig::validate() const {
  // a silent generator is a valid simulation input
  if (!(bridge.v_hat >= 0.0)) throw Error(ErrorCode::invalid_config, "generator amplitude must be non-negative");
  BridgeConfig elements = bridge;
  elements.v_hat = 1.0;
  elements.validate();
  dut.validate();
  if (!(f_s > 0.0)) throw Error(ErrorCode::invalid_config, "f_s must be positive");
  if (!(duration > 0.0) || sample_count() < 2) throw Error(ErrorCode::invalid_config, "duration must cover at least two samples");
  if (integration_substeps < 1) throw Error(ErrorCode::invalid_config, "integration_substeps must be at least 1");
  if (bit_depth < 0 || bit_depth > 30) throw Error(ErrorCode::invalid_config, "bit_depth must lie in [0, 30]");
  if (!(full_scale > 0.0)) throw Error(ErrorCode::invalid_config, "full_scale must be positive");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::invalid_config, "noise_sigma must be non-negative");
}

BridgeConfig reference_bridge(double f_gen, double v_hat) {
  BridgeConfig b;
  b.z1 = parallel_rc(15805e3, 990.56e-12, f_gen);
  b.z2 = parallel_rc(11594e3, 989.29e-12, f_gen);
  b.z3 = parallel_rc(890e3, 1059.54e-12, f_gen);
  b.zm = parallel_rc(28236e3, 4.22e-12, f_gen);
  b.v_hat = v_hat;
  b.f_gen = f_gen;
  return b;
}

SimConfig default_sim_config() {
  SimConfig cfg;
  cfg.bridge = reference_bridge();
  cfg.f_s = 36.0 * cfg.bridge.f_gen;
  return cfg;
}

double quantize(double v, int bits, double full_scale) {
  if (bits <= 0) return v;
  const double levels = std::ldexp(1.0, bits);
  const double q = 2.0 * full_scale / levels;
  const double k = std::clamp(std::nearbyint(v / q), -levels / 2.0, levels / 2.0 - 1.0);
  return k * q;
}

WaveformRecord simulate(const SimConfig& cfg) {
  cfg.validate();
  const DUTModel dut = cfg.dut;
  return simulate(cfg, [dut](double t) { return dut.capacitance(t); });
}

WaveformRecord simulate(const SimConfig& cfg, const std::function<double(double)>& capacitance) {
  cfg.validate();
  const double f_gen = cfg.bridge.f_gen;
  const double omega = 2.0 * pi * f_gen;
  const double v_hat = cfg.bridge.v_hat;
  const Element e1 = element_from(cfg.bridge.z1, f_gen, "z1");
  const Element e2 = element_from(cfg.bridge.z2, f_gen, "z2");
  const Element e3 = element_from(cfg.bridge.z3, f_gen, "z3");
  const Element em = element_from(cfg.bridge.zm, f_gen, "zm");
  const double gx = cfg.dut.r ? 1.0 / *cfg.dut.r : 0.0;

  // Nodal form for v = (v2, v3) driven by v1:  d/dt (Cn(t) v + cs v1) + G v + gs v1 = 0
  const double g11 = e1.g + gx + em.g, g12 = -em.g, g22 = e2.g + e3.g + em.g;
  const Vec2 gs{-e1.g, -e2.g};
  const Vec2 cs{-e1.c, -e2.c};
  const double c12 = -em.c, c22 = e2.c + e3.c + em.c;
  const auto c11 = [&](double t) {
    const double cx = capacitance(t);
    if (!(cx >= 0.0) || !std::isfinite(cx)) throw Error(ErrorCode::invalid_config, "DUT capacitance profile must be non-negative");
    return e1.c + cx + em.c;
  };

  const std::size_t n = cfg.sample_count();
  const int sub = cfg.integration_substeps;
  const double h = 1.0 / (cfg.f_s * sub);

  Vec2 v{0.0, 0.0};
  double c11_now = c11(0.0);
  if (cfg.start_in_steady_state) {
    // phasor solution with v1 = v_hat sin(wt) = Re{-j v_hat e^{jwt}}
    const complex v1(0.0, -v_hat);
    const complex y11(g11, omega * c11_now), y12(g12, omega * c12), y22(g22, omega * c22);
    const complex r0 = -complex(gs[0], omega * cs[0]) * v1;
    const complex r1 = -complex(gs[1], omega * cs[1]) * v1;
    const complex det = y11 * y22 - y12 * y12;
    v = {((y22 * r0 - y12 * r1) / det).real(), ((y11 * r1 - y12 * r0) / det).real()};
  }

  WaveformRecord rec;
  rec.f_s = cfg.f_s;
  rec.bit_depth = cfg.bit_depth;
  rec.t0 = 0.0;
  rec.seed = cfg.seed;
  rec.v_gen.resize(n);
  rec.v_m.resize(n);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
  const double divergence_limit = 1e6 * (v_hat + cfg.full_scale);

  double v1 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double vm = v[0] - v[1];
    if (cfg.noise_sigma > 0.0) vm += noise(rng);
    rec.v_gen[k] = quantize(v1, cfg.bit_depth, cfg.full_scale);
    rec.v_m[k] = quantize(vm, cfg.bit_depth, cfg.full_scale);
    if (k + 1 == n) break;

    for (int s = 0; s < sub; ++s) {
      const double t1 = static_cast<double>(k * sub + s + 1) * h;
      const double v1n = v_hat * std::sin(omega * t1);
      const double c11_next = c11(t1);
      const Vec2 rhs{
          c11_now * v[0] + c12 * v[1] + cs[0] * (v1 - v1n) - 0.5 * h * (g11 * v[0] + g12 * v[1] + gs[0] * (v1 + v1n)),
          c12 * v[0] + c22 * v[1] + cs[1] * (v1 - v1n) - 0.5 * h * (g12 * v[0] + g22 * v[1] + gs[1] * (v1 + v1n)),
      };
      v = solve2(c11_next + 0.5 * h * g11, c12 + 0.5 * h * g12, c12 + 0.5 * h * g12, c22 + 0.5 * h * g22, rhs);
      v1 = v1n;
      c11_now = c11_next;
    }
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || std::abs(v[0]) + std::abs(v[1]) > divergence_limit)
      throw Error(ErrorCode::integration_diverged, "node voltages diverged at t = " + std::to_string(static_cast<double>(k + 1) / cfg.f_s));
  }
  return rec;
}

double CapacitanceProfile::operator()(double t) const {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "empty capacitance profile");
  if (samples.size() == 1 || dt <= 0.0) return samples.front();
  const auto n = static_cast<double>(samples.size());
  double x = t / dt;
  if (periodic) {
    x = std::fmod(x, n);
    if (x < 0.0) x += n;
  } else {
    x = std::clamp(x, 0.0, n - 1.0);
  }
  const auto i0 = static_cast<std::size_t>(x);
  const std::size_t i1 = periodic ? (i0 + 1) % samples.size() : std::min(i0 + 1, samples.size() - 1);
  const double frac = x - static_cast<double>(i0);
  return samples[i0] + frac * (samples[i1] - samples[i0]);
}

double CapacitanceProfile::min() const { return *std::min_element(samples.begin(), samples.end()); }
double CapacitanceProfile::max() const { return *std::max_element(samples.begin(), samples.end()); }

CapacitanceProfile peaked_profile(double floor, double peak, double f_cage, double peak_width_fraction,
                                  std::size_t points_per_period) {
  if (!(floor > 0.0) || !(peak >= floor) || !(f_cage > 0.0) || !(peak_width_fraction > 0.0 && peak_width_fraction <= 1.0) ||
      points_per_period < 2)
    throw Error(ErrorCode::invalid_argument, "invalid peaked profile parameters");
  CapacitanceProfile p;
  p.periodic = true;
  p.dt = 1.0 / (f_cage * static_cast<double>(points_per_period));
  p.samples.resize(points_per_period);
  for (std::size_t i = 0; i < points_per_period; ++i) {
    const double phase = static_cast<double>(i) / static_cast<double>(points_per_period) - 0.5;
    const double u = phase / peak_width_fraction;
    const double bump = std::abs(u) < 0.5 ? 0.5 * (1.0 + std::cos(2.0 * pi * u)) : 0.0;
    p.samples[i] = floor + (peak - floor) * bump;
  }
  return p;
}

WaveformRecord scenario_single_contact(const SimConfig& cfg, const CapacitanceProfile& load_profile) {
  if (load_profile.samples.empty()) throw Error(ErrorCode::invalid_argument, "empty capacitance profile");
  return simulate(cfg, [&load_profile](double t) { return load_profile(t); });
}

}  // namespace acbridge
