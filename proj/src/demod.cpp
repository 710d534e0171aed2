#include "acbridge/demod.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "acbridge/exact_sum.hpp"

namespace acbridge {
namespace {

constexpr double grid_tolerance = 1e-9;
constexpr int fractional_half_width = 16;

bool near_integer(double x) { return std::abs(x - std::round(x)) <= grid_tolerance * std::max(1.0, std::abs(x)); }

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Kaiser-windowed sinc tap at offset t (in samples) from the interpolation point.
double windowed_sinc(double t, int half_width) {
  constexpr double beta = 8.6;
  const double u = t / half_width;
  if (std::abs(u) >= 1.0) return 0.0;
  const double sinc = t == 0.0 ? 1.0 : std::sin(pi * t) / (pi * t);
  return sinc * bessel_i0(beta * std::sqrt(1.0 - u * u)) / bessel_i0(beta);
}

}  // namespace

int DemodConfig::window_for(double f_s) const {
  if (n_window > 0) return n_window;
  return static_cast<int>(std::lround(f_s / f_gen));
}

void DemodConfig::validate(double f_s) const {
  if (!(f_gen > 0.0)) throw Error(ErrorCode::invalid_config, "demod f_gen must be positive");
  if (!(f_s > 2.0 * f_gen)) throw Error(ErrorCode::invalid_config, "sample rate must exceed twice the carrier");
  if (f_s / (4.0 * f_gen) < 1.0) throw Error(ErrorCode::invalid_config, "f_s / (4 f_gen) must be at least 1");
  const int n = window_for(f_s);
  if (n <= 0 || n % 2 != 0) throw Error(ErrorCode::invalid_config, "window length must be positive and even, got " + std::to_string(n));
  const double periods = n * f_gen / f_s;
  if (!near_integer(periods) || std::lround(periods) < 1)
    throw Error(ErrorCode::invalid_config, "window must span whole carrier periods (n_window * f_gen / f_s = " + std::to_string(periods) + ")");
  if (v_hat_mode == VhatMode::fixed && !(v_hat > 0.0)) throw Error(ErrorCode::invalid_config, "fixed v_hat must be positive");
  const double fc = cutoff();
  if (fc >= 0.0 && !(fc > 0.0 && fc < f_s / 2.0))
    throw Error(ErrorCode::invalid_config, "low-pass cutoff must lie in (0, f_s/2)");
}

QuadratureChannel quadrature_reference(std::span<const double> v_gen, const DemodConfig& cfg, double f_s) {
  const double delay = f_s / (4.0 * cfg.f_gen);
  if (!(delay >= 1.0)) throw Error(ErrorCode::invalid_config, "f_s / (4 f_gen) must be at least 1");
  const std::size_t n = v_gen.size();
  QuadratureChannel out;
  out.values.assign(n, 0.0);

  if (cfg.quadrature_mode == QuadratureMode::sample_shift) {
    if (!near_integer(delay))
      throw Error(ErrorCode::quadrature_grid_mismatch,
                  "quarter period is " + std::to_string(delay) + " samples; use fractional-delay mode");
    const auto d = static_cast<std::size_t>(std::llround(delay));
    for (std::size_t k = d; k < n; ++k) out.values[k] = v_gen[k - d];
    out.valid_from = std::min(d, n);
    out.valid_to = n;
    return out;
  }

  // y[k] = x((k - delay) T) by band-limited interpolation around base = k - ceil(delay).
  const auto shift = static_cast<std::size_t>(std::ceil(delay - grid_tolerance));
  const double mu = static_cast<double>(shift) - delay;  // fractional position in [0, 1)
  const int L = fractional_half_width;
  std::vector<double> taps(2 * L);
  double tap_sum = 0.0;
  for (int j = -L + 1; j <= L; ++j) {
    taps[j + L - 1] = windowed_sinc(j - mu, L);
    tap_sum += taps[j + L - 1];
  }
  for (double& t : taps) t /= tap_sum;

  out.valid_from = shift + static_cast<std::size_t>(L - 1);
  out.valid_to = n + shift >= static_cast<std::size_t>(L) ? std::min(n, n + shift - L) : 0;
  if (out.valid_from >= out.valid_to) {
    out.valid_from = out.valid_to = 0;
    return out;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(out.valid_from); k < static_cast<std::ptrdiff_t>(out.valid_to); ++k) {
    const std::ptrdiff_t base = k - static_cast<std::ptrdiff_t>(shift);
    double acc = 0.0;
    for (int j = -L + 1; j <= L; ++j) acc += v_gen[base + j] * taps[j + L - 1];
    out.values[k] = acc;
  }
  return out;
}

WindowSums window_sums(std::span<const double> v_m, std::span<const double> v_gen, std::span<const double> v_quad,
                       int n_window, std::size_t from, std::size_t to, Exec exec) {
  const std::size_t half = static_cast<std::size_t>(n_window / 2);
  if (to < from || from < half || to + half > v_m.size() + 1 || v_gen.size() != v_m.size() || v_quad.size() != v_m.size())
    throw Error(ErrorCode::invalid_argument, "window range exceeds record bounds");
  const std::size_t count = to - from;
  WindowSums out;
  out.in_phase.resize(count);
  out.quadrature.resize(count);
  out.gen_energy.resize(count);

  if (exec == Exec::serial) {
    ExactSum mg, mq, gg;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t k = from + c;
      mg.clear();
      mq.clear();
      gg.clear();
      for (std::size_t i = k - half; i < k + half; ++i) {
        mg.add(v_m[i] * v_gen[i]);
        mq.add(v_m[i] * v_quad[i]);
        gg.add(v_gen[i] * v_gen[i]);
      }
      out.in_phase[c] = mg.value();
      out.quadrature[c] = mq.value();
      out.gen_energy[c] = gg.value();
    }
    return out;
  }

#pragma omp parallel
  {
    const auto threads = static_cast<std::size_t>(omp_get_num_threads());
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t begin = count * tid / threads;
    const std::size_t end = count * (tid + 1) / threads;
    if (begin < end) {
      ExactSum mg, mq, gg;
      const std::size_t k0 = from + begin;
      for (std::size_t i = k0 - half; i < k0 + half; ++i) {
        mg.add(v_m[i] * v_gen[i]);
        mq.add(v_m[i] * v_quad[i]);
        gg.add(v_gen[i] * v_gen[i]);
      }
      for (std::size_t c = begin; c < end; ++c) {
        if (c > begin) {
          const std::size_t k = from + c;
          const std::size_t in = k + half - 1, out_i = k - half - 1;
          mg.add(v_m[in] * v_gen[in]);
          mq.add(v_m[in] * v_quad[in]);
          gg.add(v_gen[in] * v_gen[in]);
          mg.subtract(v_m[out_i] * v_gen[out_i]);
          mq.subtract(v_m[out_i] * v_quad[out_i]);
          gg.subtract(v_gen[out_i] * v_gen[out_i]);
        }
        out.in_phase[c] = mg.value();
        out.quadrature[c] = mq.value();
        out.gen_energy[c] = gg.value();
      }
    }
  }
  return out;
}

RatioSeries demodulate(const WaveformRecord& rec, const DemodConfig& cfg, Exec exec) {
  if (rec.v_gen.size() != rec.v_m.size()) throw Error(ErrorCode::invalid_argument, "channels differ in length");
  cfg.validate(rec.f_s);
  const int n_window = cfg.window_for(rec.f_s);
  const std::size_t len = rec.size();
  if (len < 2 * static_cast<std::size_t>(n_window))
    throw Error(ErrorCode::invalid_argument, "record shorter than two windows");

  const QuadratureChannel quad = quadrature_reference(rec.v_gen, cfg, rec.f_s);
  const std::size_t half = static_cast<std::size_t>(n_window / 2);

  RatioSeries out;
  out.f_s = rec.f_s;
  out.t0 = rec.t0;
  out.values.assign(len, complex(0.0, 0.0));
  const std::size_t lo = quad.valid_from + half;
  const std::size_t hi = quad.valid_to >= half ? quad.valid_to - half : 0;
  if (lo >= hi) {
    out.valid_from = out.valid_to = 0;
    return out;
  }
  out.valid_from = lo;
  out.valid_to = hi;

  const WindowSums sums = window_sums(rec.v_m, rec.v_gen, quad.values, n_window, lo, hi, exec);
  const double n = static_cast<double>(n_window);
  const std::size_t count = hi - lo;
  std::vector<complex> raw(count);
  for (std::size_t c = 0; c < count; ++c) {
    double scale;
    if (cfg.v_hat_mode == VhatMode::per_window) {
      const double v_hat_est = std::sqrt(2.0 * sums.gen_energy[c] / n);
      if (!(v_hat_est >= cfg.noise_floor))
        throw Error(ErrorCode::generator_absent, "generator amplitude estimate " + std::to_string(v_hat_est) +
                                                     " V below noise floor at sample " + std::to_string(lo + c));
      scale = 1.0 / sums.gen_energy[c];
    } else {
      scale = 2.0 / (n * cfg.v_hat * cfg.v_hat);
    }
    // The reference is a quarter-period delay, i.e. gen * e^{-j pi/2}; the
    // minus sign maps the correlation onto the e^{+j w t} phasor ratio.
    raw[c] = complex(scale * sums.in_phase[c], -scale * sums.quadrature[c]);
  }

  const double fc = cfg.cutoff();
  if (fc > 0.0) raw = lowpass_first_order(std::span<const complex>(raw), fc, rec.f_s);
  std::copy(raw.begin(), raw.end(), out.values.begin() + static_cast<std::ptrdiff_t>(lo));
  return out;
}

std::vector<double> lowpass_first_order(std::span<const double> x, double f_cut, double f_s) {
  if (!(f_cut > 0.0 && f_cut < f_s / 2.0)) throw Error(ErrorCode::invalid_argument, "low-pass cutoff must lie in (0, f_s/2)");
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  const double a = 1.0 - std::exp(-2.0 * pi * f_cut / f_s);
  y[0] = x[0];
  for (std::size_t k = 1; k < x.size(); ++k) y[k] = a * x[k] + (1.0 - a) * y[k - 1];
  return y;
}

std::vector<complex> lowpass_first_order(std::span<const complex> x, double f_cut, double f_s) {
  if (!(f_cut > 0.0 && f_cut < f_s / 2.0)) throw Error(ErrorCode::invalid_argument, "low-pass cutoff must lie in (0, f_s/2)");
  std::vector<complex> y(x.size());
  if (x.empty()) return y;
  const double a = 1.0 - std::exp(-2.0 * pi * f_cut / f_s);
  y[0] = x[0];
  for (std::size_t k = 1; k < x.size(); ++k) y[k] = a * x[k] + (1.0 - a) * y[k - 1];
  return y;
}

ImpedanceSeries ratio_to_impedance(const RatioSeries& ratios, const BridgeConfig& bridge, const CorrectionPair& corr,
                                   const DemodConfig& demod, Exec exec) {
  bridge.validate();
  corr.validate();
  const std::size_t count = ratios.valid_size();
  ImpedanceSeries out;
  out.bridge = bridge;
  out.correction = corr;
  out.demod = demod;
  out.timestamps.resize(count);
  out.z_dut.resize(count);
  out.c_dut.resize(count);
  out.r_dut.resize(count);
  out.flags.assign(count, 0);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const std::size_t k = ratios.valid_from + static_cast<std::size_t>(c);
    out.timestamps[c] = ratios.t0 + static_cast<double>(k) / ratios.f_s;
    std::uint8_t flag = 0;
    Impedance z(nan, nan);
    try {
      const BridgeInversion inv = invert_bridge_ratio(bridge, ratios.values[k], demod.plausibility_bound);
      if (inv.implausible) flag |= sample_flag::implausible;
      z = open_short_correct(inv.zx, corr);
    } catch (const Error& e) {
      flag |= e.code() == ErrorCode::correction_singular ? sample_flag::correction_singular
                                                         : sample_flag::non_invertible_ratio;
    }
    double c_val = nan;
    std::optional<double> r_val = nan;
    if ((flag & sample_flag::error_mask) == 0) {
      try {
        const RCEquivalent rc = rc_from_impedance(z, bridge.f_gen);
        c_val = rc.c;
        r_val = rc.r;
        if (rc.inductive) flag |= sample_flag::inductive;
      } catch (const Error&) {
        flag |= sample_flag::zero_impedance;
      }
    }
    out.z_dut[c] = z;
    out.c_dut[c] = c_val;
    out.r_dut[c] = r_val;
    out.flags[c] = flag;
  }
  return out;
}

}  // namespace acbridge
