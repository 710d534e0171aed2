#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acbridge/demod.hpp"
#include "acbridge/exec.hpp"

namespace acbridge {

enum class Taper { rectangular, hann };
enum class Channel { re, im, abs, arg };

std::string_view to_string(Channel ch);

struct FeatureWindow {
  std::size_t length = 256;  // power of two
  std::size_t hop = 128;
  Taper taper = Taper::hann;

  void validate() const;
};

struct ImpedanceChannels {
  std::vector<double> re;
  std::vector<double> im;
  std::vector<double> abs;
  std::vector<double> arg;  // radians in (-pi, pi]

  const std::vector<double>& operator[](Channel ch) const;
};

/// Re, Im, |Z| and arg Z of every sample. Error samples keep their NaN values.
ImpedanceChannels channel_split(const ImpedanceSeries& series);
ImpedanceChannels channel_split(std::span<const Impedance> z);

/// One-sided power spectrum of a tapered window, normalised so that its sum
/// equals the sum of squares of the tapered samples. Bin k is at k * f_rate / L.
std::vector<double> power_spectrum(std::span<const double> x, Taper taper);

struct FeatureSeries {
  std::vector<double> timestamps_h;  // window centres, hours
  Channel channel = Channel::re;
  std::string feature_id = "F2";
  std::vector<double> values;        // Hz for spectral-position features
  std::vector<std::uint8_t> flags;   // nonzero: value forced to 0, see central_frequency

  std::size_t size() const { return values.size(); }
};

/// Central frequency (spectral centroid, DC bin excluded) per window. The
/// window mean is subtracted before tapering. Flag 1: no AC power (value 0);
/// flag 2: window contains non-finite samples (value 0).
/// timestamps_s, when given, supplies sample times for the window centres;
/// otherwise centres are placed at index / f_rate.
FeatureSeries central_frequency(std::span<const double> x, const FeatureWindow& window, double f_rate,
                                std::span<const double> timestamps_s = {}, Exec exec = Exec::parallel);

struct SegmenterConfig {
  std::size_t window = 20;  // trailing baseline; shorter windows make the MAD scale too noisy
  double threshold = 5.0;   // robust z-score
};

/// Candidate change points: indices where the robust z-score against the
/// trailing window (median / 1.4826 MAD) exceeds the threshold. Each detection
/// suppresses further ones until the baseline has moved past it.
std::vector<std::size_t> feature_trend(std::span<const double> values, const SegmenterConfig& config = {});

}  // namespace acbridge
