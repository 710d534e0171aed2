#include "acbridge/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>

namespace acbridge {
namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    auto in = fftw_buffer<double>(n);
    auto out = fftw_buffer<fftw_complex>(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // in / out must come from fftw_buffer (matching alignment).
  void execute(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> taper_weights(std::size_t n, Taper taper) {
  std::vector<double> w(n, 1.0);
  if (taper == Taper::hann)
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

// One-sided spectrum from r2c output, scaled so that sum(S) = sum(x^2).
void one_sided(const fftw_complex* X, std::size_t n, std::vector<double>& spectrum) {
  const std::size_t half = n / 2;
  spectrum.resize(half + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k <= half; ++k) {
    const double p = (X[k][0] * X[k][0] + X[k][1] * X[k][1]) * inv_n;
    spectrum[k] = (k == 0 || (k == half && n % 2 == 0)) ? p : 2.0 * p;
  }
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

std::string_view to_string(Channel ch) {
  switch (ch) {
    case Channel::re: return "re";
    case Channel::im: return "im";
    case Channel::abs: return "abs";
    case Channel::arg: return "arg";
  }
  return "?";
}

void FeatureWindow::validate() const {
  if (!is_power_of_two(length) || length < 2) throw Error(ErrorCode::invalid_config, "feature window length must be a power of two");
  if (hop == 0 || hop > length) throw Error(ErrorCode::invalid_config, "feature hop must lie in (0, length]");
}

const std::vector<double>& ImpedanceChannels::operator[](Channel ch) const {
  switch (ch) {
    case Channel::re: return re;
    case Channel::im: return im;
    case Channel::abs: return abs;
    case Channel::arg: return arg;
  }
  return re;
}

ImpedanceChannels channel_split(std::span<const Impedance> z) {
  ImpedanceChannels out;
  out.re.resize(z.size());
  out.im.resize(z.size());
  out.abs.resize(z.size());
  out.arg.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const complex v = z[k].value();
    out.re[k] = v.real();
    out.im[k] = v.imag();
    out.abs[k] = std::abs(v);
    double a = std::arg(v);
    if (a == -pi) a = pi;  // keep (-pi, pi]
    out.arg[k] = a;
  }
  return out;
}

ImpedanceChannels channel_split(const ImpedanceSeries& series) {
  if (series.size() == 0) throw Error(ErrorCode::invalid_argument, "empty impedance series");
  return channel_split(std::span<const Impedance>(series.z_dut));
}

std::vector<double> power_spectrum(std::span<const double> x, Taper taper) {
  if (x.size() < 2) throw Error(ErrorCode::invalid_argument, "spectrum needs at least two samples");
  const RealFft fft(x.size());
  auto in = fftw_buffer<double>(x.size());
  auto out = fftw_buffer<fftw_complex>(x.size() / 2 + 1);
  const std::vector<double> w = taper_weights(x.size(), taper);
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = x[i] * w[i];
  fft.execute(in.get(), out.get());
  std::vector<double> spectrum;
  one_sided(out.get(), x.size(), spectrum);
  return spectrum;
}

FeatureSeries central_frequency(std::span<const double> x, const FeatureWindow& window, double f_rate,
                                std::span<const double> timestamps_s, Exec exec) {
  window.validate();
  if (!(f_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "feature sample rate must be positive");
  if (x.size() < window.length) throw Error(ErrorCode::invalid_argument, "channel shorter than one feature window");
  if (!timestamps_s.empty() && timestamps_s.size() != x.size())
    throw Error(ErrorCode::invalid_argument, "timestamps and channel differ in length");

  const std::size_t len = window.length;
  const std::size_t count = (x.size() - len) / window.hop + 1;
  FeatureSeries out;
  out.values.assign(count, 0.0);
  out.flags.assign(count, 0);
  out.timestamps_h.resize(count);

  const RealFft fft(len);
  const std::vector<double> w = taper_weights(len, window.taper);
  const double bin_hz = f_rate / static_cast<double>(len);

  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel if (exec == Exec::parallel)
  {
    auto in = fftw_buffer<double>(len);
    auto spec = fftw_buffer<fftw_complex>(len / 2 + 1);
    std::vector<double> power;
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
      const std::size_t start = static_cast<std::size_t>(c) * window.hop;
      const std::size_t centre = start + len / 2;
      out.timestamps_h[c] = (timestamps_s.empty() ? static_cast<double>(centre) / f_rate : timestamps_s[centre]) / 3600.0;
      // The window mean is removed before tapering; otherwise the taper
      // leaks the DC level into bin 1 and a constant input reads as a tone.
      double mean = 0.0, energy = 0.0;
      for (std::size_t i = 0; i < len; ++i) mean += x[start + i];
      mean /= static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) {
        in[i] = (x[start + i] - mean) * w[i];
        energy += x[start + i] * x[start + i] * w[i] * w[i];
      }
      if (!std::isfinite(energy) || !std::isfinite(mean)) {
        out.flags[c] = 2;
        continue;
      }
      fft.execute(in.get(), spec.get());
      one_sided(spec.get(), len, power);
      double weighted = 0.0, ac = 0.0;
      for (std::size_t k = 1; k < power.size(); ++k) {
        ac += power[k];
        weighted += static_cast<double>(k) * bin_hz * power[k];
      }
      if (energy == 0.0 || ac <= 1e-24 * energy) {
        out.flags[c] = 1;
        continue;
      }
      out.values[c] = weighted / ac;
    }
  }
  return out;
}

std::vector<std::size_t> feature_trend(std::span<const double> values, const SegmenterConfig& config) {
  if (values.size() < 10) throw Error(ErrorCode::invalid_argument, "trend detection needs at least 10 feature samples");
  if (config.window < 2) throw Error(ErrorCode::invalid_argument, "segmenter window must be at least 2");
  std::vector<std::size_t> change_points;
  std::size_t next_allowed = config.window;
  std::vector<double> base(config.window), dev(config.window);
  for (std::size_t i = config.window; i < values.size(); ++i) {
    if (i < next_allowed) continue;
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(i - config.window), values.begin() + static_cast<std::ptrdiff_t>(i),
              base.begin());
    const double med = median_of(base);
    for (std::size_t k = 0; k < base.size(); ++k) dev[k] = std::abs(base[k] - med);
    const double mad = 1.4826 * median_of(dev);
    const double diff = std::abs(values[i] - med);
    if (diff <= 1e-12 * std::max(1.0, std::abs(med))) continue;
    const double z = mad > 0.0 ? diff / mad : std::numeric_limits<double>::infinity();
    if (z > config.threshold) {
      change_points.push_back(i);
      next_allowed = i + config.window;
    }
  }
  return change_points;
}

}  // namespace acbridge
