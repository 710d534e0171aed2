#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acbridge/config.hpp"
#include "acbridge/formats.hpp"

using namespace acbridge;

namespace {

enum Exit { ok = 0, validation = 2, numeric = 3, io = 4 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_error: return io;
    case ErrorCode::invalid_argument:
    case ErrorCode::invalid_config:
    case ErrorCode::parse_error:
    case ErrorCode::quadrature_grid_mismatch:
    case ErrorCode::generator_absent:
    case ErrorCode::invalid_geometry: return validation;
    default: return numeric;
  }
}

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

RunConfig load_run_config(const GlobalOptions& g) {
  RunConfig cfg = default_run_config();
  if (!g.config.empty()) {
    load_config_file(cfg, g.config);
  } else if (const auto path = default_config_path(); !path.empty() && std::filesystem::exists(path)) {
    load_config_file(cfg, path);
  }
  apply_overrides(cfg, g.overrides);
  if (g.seed) cfg.seed = *g.seed;
  cfg.resolve();
  return cfg;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return in;
}

template <typename ReadFn>
auto read_file(const std::string& path, ReadFn&& read) {
  auto in = open_input(path);
  try {
    return read(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

// Output is rendered fully before anything touches the target, so a failing
// command never leaves a partial file behind.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    if (!std::cout) throw Error(ErrorCode::io_error, "cannot write to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::io_error, "write to " + path + " failed");
}

int cmd_simulate(const GlobalOptions& g) {
  RunConfig cfg = load_run_config(g);
  cfg.sim.validate();
  WaveformRecord rec;
  if (cfg.scenario == SimScenario::single_contact) {
    const auto& c = cfg.contact;
    rec = scenario_single_contact(cfg.sim, peaked_profile(c.floor_f, c.peak_f, c.f_cage_hz, c.width));
  } else {
    rec = simulate(cfg.sim);
  }
  std::ostringstream text;
  write_waveform_csv(text, rec);
  emit(g.out, text.str());
  std::cerr << "simulate: " << rec.size() << " samples at " << format_number(rec.f_s, 9) << " Hz, seed " << cfg.seed << '\n';
  return ok;
}

int cmd_demod(const GlobalOptions& g, const std::string& waveform, const std::string& calibration, bool use_open_hint) {
  const RunConfig cfg = load_run_config(g);
  const WaveformRecord rec = read_file(waveform, [&](std::istream& in) { return read_waveform_csv(in, cfg.bit_depth); });
  if (std::abs(rec.f_s - cfg.f_s) > 1e-6 * cfg.f_s)
    throw Error(ErrorCode::invalid_config, "record sample rate " + format_number(rec.f_s, 9) + " Hz does not match acq.f_s_hz = " +
                                               format_number(cfg.f_s, 9));
  BridgeConfig bridge = cfg.bridge;
  CorrectionPair corr = cfg.correction;
  if (!calibration.empty()) {
    const NetworkEdges edges = read_file(calibration, [](std::istream& in) { return read_edges_csv(in); });
    const BridgeFromEdges b = bridge_config_from_edges(edges, cfg.bridge.v_hat, cfg.bridge.f_gen);
    bridge = b.bridge;
    if (use_open_hint) corr.z_open = b.open_hint;
  } else if (use_open_hint) {
    throw Error(ErrorCode::invalid_argument, "--open-hint needs --calibration");
  }
  const RatioSeries ratios = demodulate(rec, cfg.demod);
  const ImpedanceSeries series = ratio_to_impedance(ratios, bridge, corr, cfg.demod);
  std::ostringstream text;
  write_impedance_csv(text, series);
  emit(g.out, text.str());
  std::size_t bad = 0;
  for (std::size_t k = 0; k < series.size(); ++k) bad += series.ok(k) ? 0 : 1;
  std::cerr << "demod: " << series.size() << " samples, " << bad << " flagged as errors\n";
  return ok;
}

int cmd_calibrate(const GlobalOptions& g, const std::vector<std::string>& inputs) {
  const RunConfig cfg = load_run_config(g);
  std::array<std::vector<Impedance>, pair_count> seen;
  for (const auto& path : inputs) {
    const auto rows = read_file(path, [](std::istream& in) { return read_pair_csv(in); });
    if (rows.empty()) throw Error(ErrorCode::parse_error, path + ": no measurement rows");
    for (const auto& r : rows) seen[r.pair.index()].push_back(r.z);
  }
  std::string missing;
  for (std::size_t k = 0; k < pair_count; ++k)
    if (seen[k].empty()) missing += (missing.empty() ? "" : ", ") + TerminalPair::from_index(k).label();
  if (!missing.empty()) throw Error(ErrorCode::invalid_argument, "missing measurement for terminal pair " + missing);

  CalibrationMeasurements meas;
  meas.f = cfg.bridge.f_gen;
  for (std::size_t k = 0; k < pair_count; ++k) {
    // repeated measurements of one pair are averaged
    complex sum{0.0, 0.0};
    for (const auto& z : seen[k]) {
      if (z.is_open()) throw Error(ErrorCode::invalid_argument, "pair " + TerminalPair::from_index(k).label() + " measured OPEN");
      sum += z.value();
    }
    meas.z_meas[k] = Impedance(sum / static_cast<double>(seen[k].size()));
  }
  meas.validate();
  const NetworkSolution sol = solve_network(meas, cfg.solver);

  std::ostringstream edges, report;
  write_edges_csv(edges, sol.edges);
  write_solver_report(report, sol.report, meas.f);
  emit(g.out, edges.str());
  if (g.out.empty() || g.out == "-")
    std::cerr << report.str();
  else
    emit(g.out + ".report", report.str());
  if (!sol.report.converged) {
    std::cerr << "calibrate: solver did not converge (residual " << format_number(sol.report.residual_norm, 6) << ")\n";
    return numeric;
  }
  return ok;
}

int cmd_features(const GlobalOptions& g, const std::string& impedance, const std::string& trend_out) {
  const RunConfig cfg = load_run_config(g);
  const ImpedanceSeries series = read_file(impedance, [](std::istream& in) { return read_impedance_csv(in); });
  if (series.size() < cfg.features.length || series.size() < 2)
    throw Error(ErrorCode::invalid_argument, "impedance series has " + std::to_string(series.size()) +
                                                 " samples, shorter than one feature window of " + std::to_string(cfg.features.length));
  const double f_rate = static_cast<double>(series.size() - 1) / (series.timestamps.back() - series.timestamps.front());
  const ImpedanceChannels ch = channel_split(series);
  std::array<FeatureSeries, 4> f;
  for (std::size_t c = 0; c < 4; ++c) {
    f[c] = central_frequency(ch[static_cast<Channel>(c)], cfg.features, f_rate, series.timestamps);
    f[c].channel = static_cast<Channel>(c);
  }
  std::ostringstream text;
  write_feature_csv(text, make_feature_table(f));
  emit(g.out, text.str());

  if (!trend_out.empty()) {
    std::ostringstream t;
    t << "channel,index,time_h\n";
    for (std::size_t c = 0; c < 4; ++c) {
      if (f[c].size() < 10) continue;
      for (std::size_t i : feature_trend(f[c].values, cfg.trend))
        t << to_string(static_cast<Channel>(c)) << ',' << i << ',' << format_number(f[c].timestamps_h[i]) << '\n';
    }
    emit(trend_out, t.str());
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbalanced AC bridge impedance measurement: simulate, demodulate, calibrate, extract features"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Config file (default: $ACBRIDGE_CONFIG_DIR/acbridge.conf when present)");
  app.add_option("--seed", g.seed, "Noise seed, overrides run.seed");
  app.add_option("--out", g.out, "Output path (default: stdout)");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set dut.c0_f=18e-12")->take_all();

  auto* sim = app.add_subcommand("simulate", "Simulate the bridge and write a waveform CSV");

  auto* demod = app.add_subcommand("demod", "Demodulate a waveform CSV into an impedance CSV");
  std::string waveform, calibration;
  bool open_hint = false;
  demod->add_option("waveform", waveform, "Waveform CSV (time_s,v_gen_V,v_m_V)")->required();
  demod->add_option("--calibration", calibration, "Calibrated edges CSV; replaces the configured bridge elements");
  demod->add_flag("--open-hint", open_hint, "Use the calibrated Z02 edge as z_open");

  auto* cal = app.add_subcommand("calibrate", "Solve the four-terminal network from six pairwise measurements");
  std::vector<std::string> cal_inputs;
  cal->add_option("measurements", cal_inputs, "Pair-tagged measurement CSVs (pair,re_ohm,im_ohm)")->required();

  auto* feat = app.add_subcommand("features", "Central-frequency features of an impedance CSV");
  std::string impedance, trend_out;
  feat->add_option("impedance", impedance, "Impedance CSV")->required();
  feat->add_option("--trend", trend_out, "Also write candidate change points to this CSV");

  auto* show = app.add_subcommand("config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : validation;
  }

  try {
    if (*sim) return cmd_simulate(g);
    if (*demod) return cmd_demod(g, waveform, calibration, open_hint);
    if (*cal) return cmd_calibrate(g, cal_inputs);
    if (*feat) return cmd_features(g, impedance, trend_out);
    if (*show) {
      const RunConfig cfg = load_run_config(g);
      std::ostringstream text;
      dump_config(text, cfg);
      emit(g.out, text.str());
      return ok;
    }
  } catch (const Error& e) {
    std::cerr << "acbridge: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "acbridge: " << e.what() << '\n';
    return numeric;
  }
  return ok;
}
