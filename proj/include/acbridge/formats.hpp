#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "acbridge/demod.hpp"
#include "acbridge/features.hpp"
#include "acbridge/network.hpp"

namespace acbridge {

// CSV interchange formats. Every file starts with a header row; complex values
// are always two real columns. Readers report malformed input as parse_error
// with the 1-based line number.

/// time_s,v_gen_V,v_m_V with 9 significant digits. The reader infers f_s from
/// the time column and rejects non-uniform sampling.
void write_waveform_csv(std::ostream& out, const WaveformRecord& rec);
WaveformRecord read_waveform_csv(std::istream& in, int bit_depth = 12);

/// time_s,re_ohm,im_ohm,c_F,r_ohm,flag at full precision; OPEN resistance is
/// "inf", error samples carry "nan".
void write_impedance_csv(std::ostream& out, const ImpedanceSeries& series);
ImpedanceSeries read_impedance_csv(std::istream& in);

/// pair,re_ohm,im_ohm. OPEN is written as inf,inf.
struct PairValue {
  TerminalPair pair{0, 1};
  Impedance z;
};
void write_pair_csv(std::ostream& out, const std::vector<PairValue>& rows);
std::vector<PairValue> read_pair_csv(std::istream& in);

void write_edges_csv(std::ostream& out, const NetworkEdges& edges);
NetworkEdges read_edges_csv(std::istream& in);

/// key=value lines: status, converged, iterations, residual_norm, condition_estimate, f_hz.
void write_solver_report(std::ostream& out, const SolverReport& report, double f_hz);

/// time_h,re_F2_hz,im_F2_hz,abs_F2_hz,arg_F2_hz,flag; flag bit c is set when
/// channel c (re, im, abs, arg) had no usable power in that window.
struct FeatureTable {
  std::vector<double> time_h;
  std::array<std::vector<double>, 4> values;
  std::vector<unsigned> flags;

  std::size_t size() const { return time_h.size(); }
};
FeatureTable make_feature_table(const std::array<FeatureSeries, 4>& series);
void write_feature_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_csv(std::istream& in);

/// "%.<digits>g" rendering used by all writers; NaN is always "nan",
/// infinities "inf" / "-inf".
std::string format_number(double v, int digits = 17);

}  // namespace acbridge
