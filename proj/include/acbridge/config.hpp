#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "acbridge/demod.hpp"
#include "acbridge/features.hpp"
#include "acbridge/network.hpp"
#include "acbridge/simulator.hpp"

namespace acbridge {

enum class SimScenario { sinusoidal, single_contact };

struct ContactProfileConfig {
  double floor_f = 18e-12;
  double peak_f = 60e-12;
  double f_cage_hz = 10.0;
  double width = 0.2;  // fraction of a cage revolution covered by the peak
};

struct RCElement {
  double c_f = 0.0;
  double r_ohm = std::numeric_limits<double>::infinity();  // inf = lossless

  Impedance impedance(double f) const;
};

/// Everything one CLI invocation needs. Bridge elements are configured as
/// parallel RC pairs; an element with c = 0 and r = inf is OPEN.
struct RunConfig {
  RCElement z1, z2, z3, zm;
  BridgeConfig bridge;  // v_hat and f_gen are set directly; elements come from z1..zm
  DemodConfig demod;
  CorrectionPair correction;
  SimConfig sim;  // bridge and acquisition fields are filled in by resolve()
  SimScenario scenario = SimScenario::sinusoidal;
  ContactProfileConfig contact;
  FeatureWindow features;
  SegmenterConfig trend;
  SolverOptions solver;
  double f_s = 720e3;
  int bit_depth = 12;
  double full_scale = 10.0;
  std::uint64_t seed = 1;

  /// Copies the shared fields into demod/sim and checks cross-field consistency.
  void resolve();
};

/// Built-in defaults: the reference bridge at 20 kHz / 6 V, f_s = 36 f_gen,
/// 12 bit, 10 ms of a steady 500 pF || 1 MOhm DUT.
RunConfig default_run_config();

/// Applies one "key = value" assignment. `where` prefixes diagnostics.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Parses flat "section.key = value" text; '#' starts a comment. Unknown keys
/// and malformed values are invalid_config errors naming the line.
void load_config(RunConfig& cfg, std::istream& in, const std::string& source_name);
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Applies "key=value" overrides from the command line.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Writes every key with its current value; load_config reads it back.
void dump_config(std::ostream& out, const RunConfig& cfg);

/// $ACBRIDGE_CONFIG_DIR/acbridge.conf when the variable is set, else empty.
std::filesystem::path default_config_path();

}  // namespace acbridge
