#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "acbridge/circuit.hpp"
#include "acbridge/exec.hpp"
#include "acbridge/impedance.hpp"

namespace acbridge {

/// Two synchronized sampled channels.
struct WaveformRecord {
  double f_s = 0.0;      // Hz
  int bit_depth = 12;    // 0 = unquantized
  double t0 = 0.0;       // s
  std::vector<double> v_gen;
  std::vector<double> v_m;
  std::optional<std::uint64_t> seed;  // noise seed when produced by the simulator

  std::size_t size() const { return v_gen.size(); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) / f_s; }
};

enum class QuadratureMode { sample_shift, fractional_delay };
enum class VhatMode { fixed, per_window };

struct DemodConfig {
  double f_gen = 20e3;
  int n_window = 0;              // samples; 0 selects one carrier period
  QuadratureMode quadrature_mode = QuadratureMode::sample_shift;
  double lp_cutoff = 0.0;        // Hz; 0 selects f_gen / 2, negative disables the low-pass
  VhatMode v_hat_mode = VhatMode::per_window;
  double v_hat = 1.0;            // used in fixed mode
  double noise_floor = 1e-3;     // V; per-window v_hat estimate below this is GeneratorAbsent
  double plausibility_bound = default_plausibility_bound;

  /// Resolved window length for a given sample rate.
  int window_for(double f_s) const;
  double cutoff() const { return lp_cutoff == 0.0 ? f_gen / 2.0 : lp_cutoff; }
  /// Checks evenness, whole carrier periods and the carrier-to-rate relation.
  void validate(double f_s) const;
};

struct QuadratureChannel {
  std::vector<double> values;   // same length as the input
  std::size_t valid_from = 0;   // first sample with a defined delayed value
  std::size_t valid_to = 0;     // one past the last valid sample
};

/// Generator channel delayed by a quarter carrier period.
QuadratureChannel quadrature_reference(std::span<const double> v_gen, const DemodConfig& cfg, double f_s);

struct RatioSeries {
  double f_s = 0.0;
  double t0 = 0.0;
  std::vector<complex> values;  // full record length; only [valid_from, valid_to) is meaningful
  std::size_t valid_from = 0;
  std::size_t valid_to = 0;

  std::size_t valid_size() const { return valid_to - valid_from; }
};

/// Raw (unfiltered) windowed in-phase/quadrature sums, one entry per valid
/// sample: sum v_m*v_gen, sum v_m*v*_gen and sum v_gen^2 over the window.
struct WindowSums {
  std::vector<double> in_phase;
  std::vector<double> quadrature;
  std::vector<double> gen_energy;
};

/// Windowed sums for centres k in [from, to), window [k - n/2, k + n/2).
/// Exec::serial recomputes every window from scratch (the O(N) reference);
/// Exec::parallel uses chunked running sums under OpenMP. Both are correctly
/// rounded exact sums, hence bit-identical.
WindowSums window_sums(std::span<const double> v_m, std::span<const double> v_gen, std::span<const double> v_quad,
                       int n_window, std::size_t from, std::size_t to, Exec exec = Exec::parallel);

/// Moving-sum quadrature demodulation followed by the first-order low-pass.
RatioSeries demodulate(const WaveformRecord& rec, const DemodConfig& cfg, Exec exec = Exec::parallel);

/// y_k = a*x_k + (1-a)*y_{k-1}, a = 1 - exp(-2*pi*f_cut/f_s), y_0 = x_0.
std::vector<double> lowpass_first_order(std::span<const double> x, double f_cut, double f_s);
std::vector<complex> lowpass_first_order(std::span<const complex> x, double f_cut, double f_s);

namespace sample_flag {
inline constexpr std::uint8_t non_invertible_ratio = 1u << 0;
inline constexpr std::uint8_t correction_singular = 1u << 1;
inline constexpr std::uint8_t implausible = 1u << 2;
inline constexpr std::uint8_t inductive = 1u << 3;
inline constexpr std::uint8_t zero_impedance = 1u << 4;
inline constexpr std::uint8_t error_mask = non_invertible_ratio | correction_singular | zero_impedance;
}  // namespace sample_flag

struct ImpedanceSeries {
  std::vector<double> timestamps;            // s, strictly increasing
  std::vector<Impedance> z_dut;              // NaN components on error samples
  std::vector<double> c_dut;                 // F
  std::vector<std::optional<double>> r_dut;  // ohms, nullopt = OPEN
  std::vector<std::uint8_t> flags;           // sample_flag bits

  BridgeConfig bridge;
  CorrectionPair correction;
  DemodConfig demod;

  std::size_t size() const { return timestamps.size(); }
  bool ok(std::size_t k) const { return (flags[k] & sample_flag::error_mask) == 0; }
};

/// Per sample: bridge inversion, open-short correction, RC extraction.
/// Never aborts; failing samples carry flags and NaN values.
ImpedanceSeries ratio_to_impedance(const RatioSeries& ratios, const BridgeConfig& bridge, const CorrectionPair& corr,
                                   const DemodConfig& demod = {}, Exec exec = Exec::parallel);

}  // namespace acbridge
