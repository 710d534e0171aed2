#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "acbridge/demod.hpp"
#include "acbridge/impedance.hpp"

namespace acbridge {

/// Parallel RC device under test with C(t) = c0 + c_amp * sin(2 pi f_c t + phase0).
struct DUTModel {
  std::optional<double> r = 1e6;  // ohms; nullopt = lossless
  double c0 = 500e-12;
  double c_amp = 0.0;
  double f_c = 0.0;
  double phase0 = 0.0;

  double capacitance(double t) const;
  void validate() const;
};

struct SimConfig {
  BridgeConfig bridge;
  DUTModel dut;
  double f_s = 720e3;
  int bit_depth = 12;           // 0 = no quantization
  double full_scale = 10.0;     // quantizer range is +-full_scale
  double noise_sigma = 0.0;     // V, white Gaussian noise on v_m
  double duration = 10e-3;      // s
  int integration_substeps = 20;
  std::uint64_t seed = 1;
  bool start_in_steady_state = true;  // initial node voltages from the phasor solution at t = 0

  std::size_t sample_count() const;
  void validate() const;
};

/// Default simulation: bridge values retrieved for the real fixture, 6 V / 20 kHz
/// carrier, f_s = 36 f_gen, 12 bit, 10 ms, DUT 500 pF || 1 MOhm.
SimConfig default_sim_config();
BridgeConfig reference_bridge(double f_gen = 20e3, double v_hat = 6.0);

/// Mid-tread uniform quantizer: lattice k * q, q = 2 * full_scale / 2^bits,
/// k in [-2^(bits-1), 2^(bits-1) - 1]. bits == 0 passes values through.
double quantize(double v, int bits, double full_scale);

/// Time-domain bridge simulation, trapezoidal rule on nodal charges q = C(t) v.
WaveformRecord simulate(const SimConfig& cfg);

/// Same with an arbitrary DUT capacitance C(t) (the DUT resistance still comes from cfg.dut.r).
WaveformRecord simulate(const SimConfig& cfg, const std::function<double(double)>& capacitance);

/// Sampled C(t) profile with linear interpolation, optionally periodic.
struct CapacitanceProfile {
  std::vector<double> samples;  // F
  double dt = 0.0;              // s between samples
  bool periodic = true;

  double operator()(double t) const;
  double min() const;
  double max() const;
};

/// Peak train for a single rolling contact: floor value outside the load zone
/// and one raised-cosine peak per cage revolution.
CapacitanceProfile peaked_profile(double floor, double peak, double f_cage, double peak_width_fraction = 0.2,
                                  std::size_t points_per_period = 2000);

/// Single-contact scenario: simulate with the profile in place of the sinusoidal DUT.
WaveformRecord scenario_single_contact(const SimConfig& cfg, const CapacitanceProfile& load_profile);

}  // namespace acbridge
