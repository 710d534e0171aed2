#include "acbridge/formats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string_view>

namespace acbridge {
namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC-4180 field splitting for one physical line (embedded newlines are not
// used by any of our formats and are rejected).
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  std::size_t i = 0;
  while (true) {
    field.clear();
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        field.push_back(line[i++]);
      }
      if (!closed) parse_fail(line_no, "unterminated quoted field");
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i < line.size() && line[i] != ',') parse_fail(line_no, "unexpected text after quoted field");
    } else {
      const std::size_t comma = line.find(',', i);
      const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
      field = std::string(trim(line.substr(i, end - i)));
      i = end;
    }
    fields.push_back(field);
    if (i >= line.size()) break;
    ++i;  // skip the comma
  }
  return fields;
}

std::vector<CsvRow> read_csv(std::istream& in, const std::vector<std::string>& header) {
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (!have_header) {
      if (fields != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        parse_fail(line_no, "expected header '" + expected + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    rows.push_back({line_no, std::move(fields)});
  }
  if (in.bad()) throw Error(ErrorCode::io_error, "read failure");
  if (!have_header) parse_fail(line_no + 1, "empty file, header row missing");
  return rows;
}

double parse_double(const std::string& s, std::size_t line, const char* column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    parse_fail(line, std::string("column ") + column + ": '" + s + "' is not a number");
  return v;
}

unsigned parse_flag(const std::string& s, std::size_t line) {
  unsigned v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) parse_fail(line, "column flag: '" + s + "' is not an integer");
  return v;
}

void write_row(std::ostream& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out << ',';
    out << f;
    first = false;
  }
  out << '\n';
}

void check_stream(std::ostream& out) {
  if (!out) throw Error(ErrorCode::io_error, "write failure");
}

const std::vector<std::string> waveform_header{"time_s", "v_gen_V", "v_m_V"};
const std::vector<std::string> impedance_header{"time_s", "re_ohm", "im_ohm", "c_F", "r_ohm", "flag"};
const std::vector<std::string> pair_header{"pair", "re_ohm", "im_ohm"};
const std::vector<std::string> feature_header{"time_h", "re_F2_hz", "im_F2_hz", "abs_F2_hz", "arg_F2_hz", "flag"};

Impedance pair_impedance(double re, double im, std::size_t line) {
  if (std::isinf(re) || std::isinf(im)) {
    if (!(re > 0.0 && im > 0.0 && std::isinf(re) && std::isinf(im))) parse_fail(line, "OPEN must be written as inf,inf");
    return Impedance::open();
  }
  if (std::isnan(re) || std::isnan(im)) parse_fail(line, "impedance is NaN");
  return {re, im};
}

}  // namespace

std::string format_number(double v, int digits) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void write_waveform_csv(std::ostream& out, const WaveformRecord& rec) {
  if (rec.v_gen.size() != rec.v_m.size()) throw Error(ErrorCode::invalid_argument, "waveform channels differ in length");
  write_row(out, {"time_s", "v_gen_V", "v_m_V"});
  for (std::size_t k = 0; k < rec.size(); ++k)
    write_row(out, {format_number(rec.time(k), 9), format_number(rec.v_gen[k], 9), format_number(rec.v_m[k], 9)});
  check_stream(out);
}

WaveformRecord read_waveform_csv(std::istream& in, int bit_depth) {
  const auto rows = read_csv(in, waveform_header);
  if (rows.size() < 2) parse_fail(rows.empty() ? 2 : rows.back().line + 1, "waveform needs at least two samples");
  WaveformRecord rec;
  rec.bit_depth = bit_depth;
  std::vector<double> t(rows.size());
  rec.v_gen.resize(rows.size());
  rec.v_m.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    t[k] = parse_double(r.fields[0], r.line, "time_s");
    rec.v_gen[k] = parse_double(r.fields[1], r.line, "v_gen_V");
    rec.v_m[k] = parse_double(r.fields[2], r.line, "v_m_V");
    if (!std::isfinite(t[k]) || !std::isfinite(rec.v_gen[k]) || !std::isfinite(rec.v_m[k])) parse_fail(r.line, "non-finite value");
    if (k > 0 && !(t[k] > t[k - 1])) parse_fail(r.line, "time_s not strictly increasing");
  }
  rec.t0 = t.front();
  // The time column carries 9 digits; round the inferred rate to the same precision.
  const double raw = static_cast<double>(rows.size() - 1) / (t.back() - t.front());
  rec.f_s = std::stod(format_number(raw, 9));
  const double period = 1.0 / rec.f_s;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double expected = rec.time(k);
    if (std::abs(t[k] - expected) > 1e-3 * period + 1e-8 * std::abs(expected))
      parse_fail(rows[k].line, "non-uniform sampling (expected time " + format_number(expected, 9) + ")");
  }
  return rec;
}

void write_impedance_csv(std::ostream& out, const ImpedanceSeries& s) {
  const std::size_t n = s.size();
  if (s.z_dut.size() != n || s.c_dut.size() != n || s.r_dut.size() != n || s.flags.size() != n)
    throw Error(ErrorCode::invalid_argument, "impedance series columns differ in length");
  write_row(out, {"time_s", "re_ohm", "im_ohm", "c_F", "r_ohm", "flag"});
  for (std::size_t k = 0; k < n; ++k) {
    const Impedance& z = s.z_dut[k];
    const double re = z.is_open() ? INFINITY : z.re();
    const double im = z.is_open() ? INFINITY : z.im();
    write_row(out, {format_number(s.timestamps[k]), format_number(re), format_number(im), format_number(s.c_dut[k]),
                    s.r_dut[k] ? format_number(*s.r_dut[k]) : "inf", std::to_string(s.flags[k])});
  }
  check_stream(out);
}

ImpedanceSeries read_impedance_csv(std::istream& in) {
  const auto rows = read_csv(in, impedance_header);
  if (rows.empty()) parse_fail(2, "impedance file has no samples");
  ImpedanceSeries s;
  for (const auto& r : rows) {
    const double t = parse_double(r.fields[0], r.line, "time_s");
    const double re = parse_double(r.fields[1], r.line, "re_ohm");
    const double im = parse_double(r.fields[2], r.line, "im_ohm");
    const double c = parse_double(r.fields[3], r.line, "c_F");
    const double rr = parse_double(r.fields[4], r.line, "r_ohm");
    const unsigned flag = parse_flag(r.fields[5], r.line);
    if (!std::isfinite(t)) parse_fail(r.line, "non-finite time");
    if (!s.timestamps.empty() && !(t > s.timestamps.back())) parse_fail(r.line, "time_s not strictly increasing");
    if (flag > 255) parse_fail(r.line, "flag out of range");
    s.timestamps.push_back(t);
    s.z_dut.push_back(std::isinf(re) && std::isinf(im) && re > 0.0 && im > 0.0 ? Impedance::open() : Impedance(re, im));
    s.c_dut.push_back(c);
    s.r_dut.push_back(std::isinf(rr) && rr > 0.0 ? std::nullopt : std::optional<double>(rr));
    s.flags.push_back(static_cast<std::uint8_t>(flag));
  }
  return s;
}

void write_pair_csv(std::ostream& out, const std::vector<PairValue>& rows) {
  write_row(out, {"pair", "re_ohm", "im_ohm"});
  for (const auto& r : rows) {
    if (r.z.is_open())
      write_row(out, {r.pair.label(), "inf", "inf"});
    else
      write_row(out, {r.pair.label(), format_number(r.z.re()), format_number(r.z.im())});
  }
  check_stream(out);
}

std::vector<PairValue> read_pair_csv(std::istream& in) {
  const auto rows = read_csv(in, pair_header);
  std::vector<PairValue> out;
  for (const auto& r : rows) {
    const auto pair = TerminalPair::parse(r.fields[0]);
    if (!pair) parse_fail(r.line, "'" + r.fields[0] + "' is not a terminal pair (expected e.g. 01 ... 23)");
    const double re = parse_double(r.fields[1], r.line, "re_ohm");
    const double im = parse_double(r.fields[2], r.line, "im_ohm");
    out.push_back({*pair, pair_impedance(re, im, r.line)});
  }
  return out;
}

void write_edges_csv(std::ostream& out, const NetworkEdges& edges) {
  std::vector<PairValue> rows;
  for (std::size_t k = 0; k < pair_count; ++k) rows.push_back({TerminalPair::from_index(k), edges.z[k]});
  write_pair_csv(out, rows);
}

NetworkEdges read_edges_csv(std::istream& in) {
  const auto rows = read_pair_csv(in);
  NetworkEdges edges;
  std::array<bool, pair_count> seen{};
  for (const auto& r : rows) {
    if (seen[r.pair.index()]) throw Error(ErrorCode::parse_error, "duplicate pair " + r.pair.label());
    seen[r.pair.index()] = true;
    edges[r.pair] = r.z;
  }
  for (std::size_t k = 0; k < pair_count; ++k)
    if (!seen[k]) throw Error(ErrorCode::parse_error, "missing pair " + TerminalPair::from_index(k).label());
  return edges;
}

void write_solver_report(std::ostream& out, const SolverReport& report, double f_hz) {
  const char* status = report.status == SolverStatus::converged       ? "converged"
                       : report.status == SolverStatus::singular_jacobian ? "singular_jacobian"
                                                                          : "not_converged";
  out << "status=" << status << '\n'
      << "converged=" << (report.converged ? "true" : "false") << '\n'
      << "iterations=" << report.iterations << '\n'
      << "residual_norm=" << format_number(report.residual_norm) << '\n'
      << "condition_estimate=" << format_number(report.condition_estimate) << '\n'
      << "f_hz=" << format_number(f_hz) << '\n';
  check_stream(out);
}

FeatureTable make_feature_table(const std::array<FeatureSeries, 4>& series) {
  FeatureTable t;
  t.time_h = series[0].timestamps_h;
  t.flags.assign(t.time_h.size(), 0);
  for (std::size_t c = 0; c < 4; ++c) {
    if (series[c].size() != t.time_h.size() || series[c].timestamps_h != t.time_h)
      throw Error(ErrorCode::invalid_argument, "feature series are not aligned");
    t.values[c] = series[c].values;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (series[c].flags[k] != 0) t.flags[k] |= 1u << c;
  }
  return t;
}

void write_feature_csv(std::ostream& out, const FeatureTable& t) {
  write_row(out, {"time_h", "re_F2_hz", "im_F2_hz", "abs_F2_hz", "arg_F2_hz", "flag"});
  for (std::size_t k = 0; k < t.size(); ++k)
    write_row(out, {format_number(t.time_h[k]), format_number(t.values[0][k]), format_number(t.values[1][k]),
                    format_number(t.values[2][k]), format_number(t.values[3][k]), std::to_string(t.flags[k])});
  check_stream(out);
}

FeatureTable read_feature_csv(std::istream& in) {
  const auto rows = read_csv(in, feature_header);
  FeatureTable t;
  for (const auto& r : rows) {
    t.time_h.push_back(parse_double(r.fields[0], r.line, "time_h"));
    for (std::size_t c = 0; c < 4; ++c) t.values[c].push_back(parse_double(r.fields[c + 1], r.line, feature_header[c + 1].c_str()));
    t.flags.push_back(parse_flag(r.fields[5], r.line));
  }
  return t;
}

}  // namespace acbridge
