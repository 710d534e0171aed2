#include "acbridge/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string_view>

namespace acbridge {
namespace {

[[noreturn]] void bad_value(const std::string& where, const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::invalid_config, where + ": " + key + " = '" + value + "': expected " + expected);
}

double to_double(const std::string& key, const std::string& v, const std::string& where) {
  double out = 0.0;
  const char* first = v.data();
  if (!v.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || first == v.data() + v.size() || std::isnan(out))
    bad_value(where, key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v, const std::string& where) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(where, key, v, "an integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v, const std::string& where) {
  return to_int<std::size_t>(key, v, where);
}

bool to_bool(const std::string& key, const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(where, key, v, "true or false");
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round trip
  return ec == std::errc() ? std::string(buf, ptr) : "nan";
}

double opt_r(const std::optional<double>& r) { return r ? *r : std::numeric_limits<double>::infinity(); }
std::optional<double> from_r(double r) { return std::isinf(r) && r > 0.0 ? std::nullopt : std::optional<double>(r); }

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;  // (cfg, value, where)
  std::function<std::string(const RunConfig&)> get;
};

#define ACB_DOUBLE(NAME, FIELD)                                                                                        \
  Key {                                                                                                                \
    NAME, [](RunConfig& c, const std::string& v, const std::string& w) { c.FIELD = to_double(NAME, v, w); },           \
        [](const RunConfig& c) { return num(c.FIELD); }                                                                \
  }

void add_element(std::vector<Key>& keys, const std::string& prefix, RCElement RunConfig::*member) {
  keys.push_back({prefix + "_c_f",
                  [member, prefix](RunConfig& c, const std::string& v, const std::string& w) {
                    (c.*member).c_f = to_double(prefix + "_c_f", v, w);
                  },
                  [member](const RunConfig& c) { return num((c.*member).c_f); }});
  keys.push_back({prefix + "_r_ohm",
                  [member, prefix](RunConfig& c, const std::string& v, const std::string& w) {
                    (c.*member).r_ohm = to_double(prefix + "_r_ohm", v, w);
                  },
                  [member](const RunConfig& c) { return num((c.*member).r_ohm); }});
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    add_element(k, "bridge.z1", &RunConfig::z1);
    add_element(k, "bridge.z2", &RunConfig::z2);
    add_element(k, "bridge.z3", &RunConfig::z3);
    add_element(k, "bridge.zm", &RunConfig::zm);
    k.push_back(ACB_DOUBLE("bridge.v_hat_v", bridge.v_hat));
    k.push_back(ACB_DOUBLE("bridge.f_gen_hz", bridge.f_gen));

    k.push_back(ACB_DOUBLE("acq.f_s_hz", f_s));
    k.push_back({"acq.bit_depth", [](RunConfig& c, const std::string& v, const std::string& w) { c.bit_depth = to_int<int>("acq.bit_depth", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.bit_depth); }});
    k.push_back(ACB_DOUBLE("acq.full_scale_v", full_scale));

    k.push_back({"demod.n_window_samples",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.demod.n_window = to_int<int>("demod.n_window_samples", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.demod.n_window); }});
    k.push_back({"demod.quadrature_mode",
                 [](RunConfig& c, const std::string& v, const std::string& w) {
                   if (v == "sample_shift") c.demod.quadrature_mode = QuadratureMode::sample_shift;
                   else if (v == "fractional_delay") c.demod.quadrature_mode = QuadratureMode::fractional_delay;
                   else bad_value(w, "demod.quadrature_mode", v, "sample_shift or fractional_delay");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.demod.quadrature_mode == QuadratureMode::sample_shift ? "sample_shift" : "fractional_delay");
                 }});
    k.push_back(ACB_DOUBLE("demod.lp_cutoff_hz", demod.lp_cutoff));
    k.push_back({"demod.v_hat_mode",
                 [](RunConfig& c, const std::string& v, const std::string& w) {
                   if (v == "per_window") c.demod.v_hat_mode = VhatMode::per_window;
                   else if (v == "fixed") c.demod.v_hat_mode = VhatMode::fixed;
                   else bad_value(w, "demod.v_hat_mode", v, "per_window or fixed");
                 },
                 [](const RunConfig& c) { return std::string(c.demod.v_hat_mode == VhatMode::fixed ? "fixed" : "per_window"); }});
    k.push_back(ACB_DOUBLE("demod.noise_floor_v", demod.noise_floor));
    k.push_back(ACB_DOUBLE("demod.plausibility_bound_ohm", demod.plausibility_bound));

    for (const char* which : {"open", "short"}) {
      const std::string w = which;
      for (const char* part : {"re", "im"}) {
        const std::string name = "correction.z_" + w + "_" + part + "_ohm";
        const bool is_re = std::string_view(part) == "re";
        const bool is_open = w == "open";
        k.push_back({name,
                     [name, is_re, is_open](RunConfig& c, const std::string& v, const std::string& where) {
                       Impedance& z = is_open ? c.correction.z_open : c.correction.z_short;
                       const double x = to_double(name, v, where);
                       if (std::isinf(x)) {
                         if (!is_open || x < 0.0) bad_value(where, name, v, "a finite number (inf is only allowed for z_open)");
                         z = Impedance::open();
                         return;
                       }
                       const double re = z.is_open() ? 0.0 : z.re();
                       const double im = z.is_open() ? 0.0 : z.im();
                       z = is_re ? Impedance(x, im) : Impedance(re, x);
                     },
                     [is_re, is_open](const RunConfig& c) {
                       const Impedance& z = is_open ? c.correction.z_open : c.correction.z_short;
                       if (z.is_open()) return std::string("inf");
                       return num(is_re ? z.re() : z.im());
                     }});
      }
    }

    k.push_back(ACB_DOUBLE("sim.duration_s", sim.duration));
    k.push_back(ACB_DOUBLE("sim.noise_sigma_v", sim.noise_sigma));
    k.push_back({"sim.substeps",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.sim.integration_substeps = to_int<int>("sim.substeps", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.sim.integration_substeps); }});
    k.push_back({"sim.steady_start",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.sim.start_in_steady_state = to_bool("sim.steady_start", v, w); },
                 [](const RunConfig& c) { return std::string(c.sim.start_in_steady_state ? "true" : "false"); }});
    k.push_back({"sim.scenario",
                 [](RunConfig& c, const std::string& v, const std::string& w) {
                   if (v == "sinusoidal") c.scenario = SimScenario::sinusoidal;
                   else if (v == "single_contact") c.scenario = SimScenario::single_contact;
                   else bad_value(w, "sim.scenario", v, "sinusoidal or single_contact");
                 },
                 [](const RunConfig& c) { return std::string(c.scenario == SimScenario::sinusoidal ? "sinusoidal" : "single_contact"); }});
    k.push_back(ACB_DOUBLE("sim.contact_floor_f", contact.floor_f));
    k.push_back(ACB_DOUBLE("sim.contact_peak_f", contact.peak_f));
    k.push_back(ACB_DOUBLE("sim.contact_cage_hz", contact.f_cage_hz));
    k.push_back(ACB_DOUBLE("sim.contact_width", contact.width));

    k.push_back({"dut.r_ohm", [](RunConfig& c, const std::string& v, const std::string& w) { c.sim.dut.r = from_r(to_double("dut.r_ohm", v, w)); },
                 [](const RunConfig& c) { return num(opt_r(c.sim.dut.r)); }});
    k.push_back(ACB_DOUBLE("dut.c0_f", sim.dut.c0));
    k.push_back(ACB_DOUBLE("dut.c_amp_f", sim.dut.c_amp));
    k.push_back(ACB_DOUBLE("dut.f_c_hz", sim.dut.f_c));
    k.push_back(ACB_DOUBLE("dut.phase0_rad", sim.dut.phase0));

    k.push_back({"features.length_samples",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.features.length = to_size("features.length_samples", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.features.length); }});
    k.push_back({"features.hop_samples",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.features.hop = to_size("features.hop_samples", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.features.hop); }});
    k.push_back({"features.taper",
                 [](RunConfig& c, const std::string& v, const std::string& w) {
                   if (v == "hann") c.features.taper = Taper::hann;
                   else if (v == "rectangular") c.features.taper = Taper::rectangular;
                   else bad_value(w, "features.taper", v, "hann or rectangular");
                 },
                 [](const RunConfig& c) { return std::string(c.features.taper == Taper::hann ? "hann" : "rectangular"); }});
    k.push_back({"trend.window_samples",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.trend.window = to_size("trend.window_samples", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.trend.window); }});
    k.push_back(ACB_DOUBLE("trend.threshold", trend.threshold));

    k.push_back({"calibrate.max_iter",
                 [](RunConfig& c, const std::string& v, const std::string& w) { c.solver.max_iter = to_int<int>("calibrate.max_iter", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.solver.max_iter); }});
    k.push_back(ACB_DOUBLE("calibrate.tolerance", solver.tolerance));

    k.push_back({"run.seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.seed = to_int<std::uint64_t>("run.seed", v, w); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    return k;
  }();
  return keys;
}

#undef ACB_DOUBLE

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

RCElement element_of(std::optional<double> r, double c) { return {c, opt_r(r)}; }

}  // namespace

Impedance RCElement::impedance(double f) const { return parallel_rc(from_r(r_ohm), c_f, f); }

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.bridge.f_gen = 20e3;
  cfg.bridge.v_hat = 6.0;
  cfg.z1 = element_of(15805e3, 990.56e-12);
  cfg.z2 = element_of(11594e3, 989.29e-12);
  cfg.z3 = element_of(890e3, 1059.54e-12);
  cfg.zm = element_of(28236e3, 4.22e-12);
  cfg.f_s = 36.0 * cfg.bridge.f_gen;
  cfg.sim = default_sim_config();
  return cfg;
}

void RunConfig::resolve() {
  const auto check = [](const std::function<void()>& fn, const char* what) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(ErrorCode::invalid_config, std::string(what) + ": " + e.what());
    }
  };
  check(
      [&] {
        if (!(bridge.f_gen > 0.0)) throw Error(ErrorCode::invalid_argument, "bridge.f_gen_hz must be positive");
        bridge.z1 = z1.impedance(bridge.f_gen);
        bridge.z2 = z2.impedance(bridge.f_gen);
        bridge.z3 = z3.impedance(bridge.f_gen);
        bridge.zm = zm.impedance(bridge.f_gen);
        bridge.validate();
      },
      "bridge");
  demod.f_gen = bridge.f_gen;
  demod.v_hat = bridge.v_hat;
  check([&] { demod.validate(f_s); }, "demod");
  if (demod.quadrature_mode == QuadratureMode::sample_shift) {
    const double q = f_s / (4.0 * bridge.f_gen);
    if (std::abs(q - std::round(q)) > 1e-9 * q)
      throw Error(ErrorCode::invalid_config,
                  "demod: acq.f_s_hz / (4 bridge.f_gen_hz) = " + num(q) + " is not an integer; set demod.quadrature_mode = fractional_delay");
  }
  check([&] { correction.validate(); }, "correction");
  check([&] { features.validate(); }, "features");
  if (trend.window < 2) throw Error(ErrorCode::invalid_config, "trend.window_samples must be at least 2");
  if (bit_depth < 0 || bit_depth > 30) throw Error(ErrorCode::invalid_config, "acq.bit_depth must lie in [0, 30]");
  if (!(full_scale > 0.0)) throw Error(ErrorCode::invalid_config, "acq.full_scale_v must be positive");
  if (solver.max_iter < 1 || !(solver.tolerance > 0.0)) throw Error(ErrorCode::invalid_config, "calibrate: max_iter >= 1 and tolerance > 0 required");
  sim.bridge = bridge;
  sim.f_s = f_s;
  sim.bit_depth = bit_depth;
  sim.full_scale = full_scale;
  sim.seed = seed;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  for (const Key& k : registry()) {
    if (k.name == key) {
      k.set(cfg, value, where);
      return;
    }
  }
  throw Error(ErrorCode::invalid_config, where + ": unknown key '" + key + "'");
}

void load_config(RunConfig& cfg, std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source_name + ":" + std::to_string(line_no);
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::invalid_config, where + ": expected 'key = value'");
    const std::string key(trim(s.substr(0, eq)));
    const std::string value(trim(s.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorCode::invalid_config, where + ": missing key");
    apply_setting(cfg, key, value, where);
  }
  if (in.bad()) throw Error(ErrorCode::io_error, "cannot read " + source_name);
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config file " + path.string());
  load_config(cfg, in, path.string());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::invalid_config, "override '" + o + "': expected key=value");
    apply_setting(cfg, std::string(trim(std::string_view(o).substr(0, eq))), std::string(trim(std::string_view(o).substr(eq + 1))),
                  "override '" + o + "'");
  }
}

void dump_config(std::ostream& out, const RunConfig& cfg) {
  for (const Key& k : registry()) out << k.name << " = " << k.get(cfg) << '\n';
}

std::filesystem::path default_config_path() {
  const char* dir = std::getenv("ACBRIDGE_CONFIG_DIR");
  if (dir == nullptr || *dir == '\0') return {};
  return std::filesystem::path(dir) / "acbridge.conf";
}

}  // namespace acbridge
