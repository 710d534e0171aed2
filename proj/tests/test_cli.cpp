#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "acbridge/formats.hpp"
#include "acbridge/network.hpp"
#include "oracles.hpp"

using namespace acbridge;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("acbridge_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the CLI with an empty config directory; stderr goes to err.txt.
  int run(const std::string& args) {
    const std::string cmd = "ACBRIDGE_CONFIG_DIR= " + std::string(ACBRIDGE_CLI) + " " + args + " 2> " + path("err.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(path("err.txt")); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name));
    out << text;
  }

  fs::path dir_;
};

ImpedanceSeries read_impedance(const std::string& p) {
  std::ifstream in(p);
  return read_impedance_csv(in);
}

NetworkEdges fixture_edges(double f) {
  NetworkEdges t;
  t[{1, 2}] = parallel_rc(15805e3, 990.56e-12, f);
  t[{1, 3}] = parallel_rc(11594e3, 989.29e-12, f);
  t[{0, 3}] = parallel_rc(890e3, 1059.54e-12, f);
  t[{2, 3}] = parallel_rc(28236e3, 4.22e-12, f);
  t[{0, 1}] = parallel_rc(5e6, 150e-12, f);
  t[{0, 2}] = parallel_rc(20e6, 12e-12, f);
  return t;
}

// Median of the C column over samples without error flags.
double median_c(const ImpedanceSeries& s) {
  std::vector<double> c;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s.ok(k)) c.push_back(s.c_dut[k]);
  if (c.empty()) return std::nan("");
  std::nth_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(c.size() / 2), c.end());
  return c[c.size() / 2];
}

}  // namespace

TEST_F(Cli, SimulateDefaultRecord) {
  ASSERT_EQ(run("--out " + path("w.csv") + " simulate"), 0) << stderr_text();
  std::ifstream in(path("w.csv"));
  const WaveformRecord rec = read_waveform_csv(in);
  EXPECT_EQ(rec.size(), 7200u);
  EXPECT_NEAR(rec.f_s, 720e3, 1e-3);
}

TEST_F(Cli, ZeroDurationIsRejectedWithoutOutput) {
  EXPECT_EQ(run("--set sim.duration_s=0 --out " + path("w.csv") + " simulate"), 2);
  EXPECT_FALSE(fs::exists(path("w.csv")));
  EXPECT_FALSE(stderr_text().empty());
}

TEST_F(Cli, SameSeedIsByteIdentical) {
  ASSERT_EQ(run("--seed 9 --set sim.noise_sigma_v=0.01 --out " + path("a.csv") + " simulate"), 0);
  ASSERT_EQ(run("--seed 9 --set sim.noise_sigma_v=0.01 --out " + path("b.csv") + " simulate"), 0);
  ASSERT_EQ(run("--seed 10 --set sim.noise_sigma_v=0.01 --out " + path("c.csv") + " simulate"), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, FullChainIsDeterministic) {
  for (const char* tag : {"1", "2"}) {
    const std::string t = tag;
    ASSERT_EQ(run("--seed 4 --set sim.noise_sigma_v=0.005 --set sim.duration_s=0.05 --out " + path("w" + t + ".csv") + " simulate"), 0);
    ASSERT_EQ(run("--set sim.duration_s=0.05 --out " + path("z" + t + ".csv") + " demod " + path("w" + t + ".csv")), 0)
        << stderr_text();
    ASSERT_EQ(run("--set features.length_samples=4096 --set features.hop_samples=2048 --out " + path("f" + t + ".csv") +
                  " features " + path("z" + t + ".csv")),
              0)
        << stderr_text();
  }
  EXPECT_EQ(slurp(path("z1.csv")), slurp(path("z2.csv")));
  EXPECT_EQ(slurp(path("f1.csv")), slurp(path("f2.csv")));
}

TEST_F(Cli, DemodRecoversConstantCapacitance) {
  ASSERT_EQ(run("--out " + path("w.csv") + " simulate"), 0);
  ASSERT_EQ(run("--out " + path("z.csv") + " demod " + path("w.csv")), 0) << stderr_text();
  const ImpedanceSeries s = read_impedance(path("z.csv"));
  ASSERT_GT(s.size(), 1000u);
  for (std::size_t k = 0; k < s.size(); ++k) {
    ASSERT_TRUE(s.ok(k)) << k;
    EXPECT_NEAR(s.c_dut[k], 500e-12, 0.005 * 500e-12) << k;
  }
}

TEST_F(Cli, SmallCapacitanceThroughChain) {
  const std::string common = "--set dut.c0_f=18e-12 ";
  ASSERT_EQ(run(common + "--out " + path("w.csv") + " simulate"), 0);
  ASSERT_EQ(run(common + "--out " + path("z.csv") + " demod " + path("w.csv")), 0) << stderr_text();
  EXPECT_NEAR(median_c(read_impedance(path("z.csv"))), 18e-12, 0.02 * 18e-12);
}

TEST_F(Cli, DemodRejectsEmptyFile) {
  write_text("empty.csv", "");
  EXPECT_EQ(run("--out " + path("z.csv") + " demod " + path("empty.csv")), 2);
  EXPECT_NE(stderr_text().find("ParseError"), std::string::npos) << stderr_text();
  EXPECT_FALSE(fs::exists(path("z.csv")));
}

TEST_F(Cli, DemodRejectsSampleRateMismatch) {
  ASSERT_EQ(run("--out " + path("w.csv") + " simulate"), 0);
  EXPECT_EQ(run("--set acq.f_s_hz=1440000 --out " + path("z.csv") + " demod " + path("w.csv")), 2);
  EXPECT_NE(stderr_text().find("sample rate"), std::string::npos) << stderr_text();
}

TEST_F(Cli, DemodMissingInputIsIoError) { EXPECT_EQ(run("demod " + path("nope.csv")), 4); }

TEST_F(Cli, CalibrateSixPairs) {
  const NetworkEdges truth = fixture_edges(20e3);
  std::string files;
  for (std::size_t k = 0; k < pair_count; ++k) {
    const TerminalPair p = TerminalPair::from_index(k);
    std::ostringstream text;
    write_pair_csv(text, {{p, pairwise_measured(truth, p.i(), p.j())}});
    write_text("m" + p.label() + ".csv", text.str());
    files += " " + path("m" + p.label() + ".csv");
  }
  ASSERT_EQ(run("--out " + path("edges.csv") + " calibrate" + files), 0) << stderr_text();
  std::ifstream in(path("edges.csv"));
  const NetworkEdges got = read_edges_csv(in);
  for (std::size_t k = 0; k < pair_count; ++k)
    EXPECT_LT(std::abs(got.z[k].value() - truth.z[k].value()) / truth.z[k].magnitude(), 1e-6) << k;

  const std::string report = slurp(path("edges.csv.report"));
  EXPECT_NE(report.find("converged=true"), std::string::npos) << report;
  const auto pos = report.find("residual_norm=");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LT(std::stod(report.substr(pos + 14)), 1e-8);

  // The calibrated edges drive demod directly.
  ASSERT_EQ(run("--out " + path("w.csv") + " simulate"), 0);
  EXPECT_EQ(run("--out " + path("z.csv") + " demod --calibration " + path("edges.csv") + " " + path("w.csv")), 0) << stderr_text();
}

TEST_F(Cli, CalibrateNamesMissingPair) {
  const NetworkEdges truth = fixture_edges(20e3);
  std::string files;
  for (std::size_t k = 0; k < pair_count; ++k) {
    const TerminalPair p = TerminalPair::from_index(k);
    if (p.label() == "13") continue;
    std::ostringstream text;
    write_pair_csv(text, {{p, pairwise_measured(truth, p.i(), p.j())}});
    write_text("m" + p.label() + ".csv", text.str());
    files += " " + path("m" + p.label() + ".csv");
  }
  EXPECT_EQ(run("--out " + path("edges.csv") + " calibrate" + files), 2);
  EXPECT_NE(stderr_text().find("13"), std::string::npos) << stderr_text();
  EXPECT_FALSE(fs::exists(path("edges.csv")));
}

TEST_F(Cli, CalibrateAllEqualMeasurements) {
  std::vector<PairValue> rows;
  for (std::size_t k = 0; k < pair_count; ++k) rows.push_back({TerminalPair::from_index(k), Impedance(2e5, -3e6)});
  std::ostringstream text;
  write_pair_csv(text, rows);
  write_text("all.csv", text.str());
  ASSERT_EQ(run("--out " + path("edges.csv") + " calibrate " + path("all.csv")), 0) << stderr_text();
  std::ifstream in(path("edges.csv"));
  const NetworkEdges got = read_edges_csv(in);
  for (const auto& e : got.z) {
    EXPECT_NEAR(e.re(), 4e5, 1e-6 * 4e5);
    EXPECT_NEAR(e.im(), -6e6, 1e-6 * 6e6);
  }
}

TEST_F(Cli, FeaturesOfConstantSeriesAreFlagged) {
  ImpedanceSeries s;
  for (std::size_t k = 0; k < 1024; ++k) {
    s.timestamps.push_back(static_cast<double>(k) * 1e-3);
    s.z_dut.push_back(Impedance(1e5, -2e6));
    s.c_dut.push_back(1e-12);
    s.r_dut.push_back(1e5);
    s.flags.push_back(0);
  }
  std::ostringstream text;
  write_impedance_csv(text, s);
  write_text("z.csv", text.str());
  ASSERT_EQ(run("--out " + path("f.csv") + " features " + path("z.csv")), 0) << stderr_text();
  std::ifstream in(path("f.csv"));
  const FeatureTable t = read_feature_csv(in);
  ASSERT_EQ(t.size(), 7u);  // (1024 - 256) / 128 + 1
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(t.flags[k], 15u);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(t.values[c][k], 0.0);
  }
}

TEST_F(Cli, FeaturesFindRippleOnMagnitude) {
  // 50 Hz ripple on |Z| only, sampled at 1024 Hz.
  ImpedanceSeries s;
  const double f_rate = 1024.0;
  for (std::size_t k = 0; k < 4096; ++k) {
    const double t = static_cast<double>(k) / f_rate;
    const double mag = 1e6 * (1.0 + 0.01 * std::sin(2.0 * oracle::pi * 50.0 * t));
    const Impedance z(std::polar(mag, -1.2));
    s.timestamps.push_back(t);
    s.z_dut.push_back(z);
    s.c_dut.push_back(1e-12);
    s.r_dut.push_back(1e6);
    s.flags.push_back(0);
  }
  std::ostringstream text;
  write_impedance_csv(text, s);
  write_text("z.csv", text.str());
  ASSERT_EQ(run("--out " + path("f.csv") + " features " + path("z.csv") + " --trend " + path("t.csv")), 0) << stderr_text();
  std::ifstream in(path("f.csv"));
  const FeatureTable t = read_feature_csv(in);
  ASSERT_EQ(t.size(), 31u);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(t.values[2][k], 50.0, 1.0) << k;
    EXPECT_EQ(t.flags[k] & (1u << 2), 0u);
    EXPECT_EQ(t.flags[k] & (1u << 3), 1u << 3) << "arg is constant";
    // The series starts at t = 0, so window k is centred on sample 128 k + 128.
    EXPECT_NEAR(t.time_h[k] * 3600.0, (128.0 * static_cast<double>(k) + 128.0) / f_rate, 1.0 / f_rate);
  }
  EXPECT_EQ(slurp(path("t.csv")).substr(0, 20), "channel,index,time_h");
}

TEST_F(Cli, FeaturesRefuseShortSeries) {
  ImpedanceSeries s;
  for (std::size_t k = 0; k < 100; ++k) {
    s.timestamps.push_back(static_cast<double>(k));
    s.z_dut.push_back(Impedance(1.0, -1.0));
    s.c_dut.push_back(1.0);
    s.r_dut.push_back(1.0);
    s.flags.push_back(0);
  }
  std::ostringstream text;
  write_impedance_csv(text, s);
  write_text("z.csv", text.str());
  EXPECT_EQ(run("--out " + path("f.csv") + " features " + path("z.csv")), 2);
  EXPECT_NE(stderr_text().find("shorter than one feature window"), std::string::npos) << stderr_text();
}

TEST_F(Cli, ConfigFileFromEnvironmentAndOverrides) {
  write_text("acbridge.conf", "sim.duration_s = 0.002\n");
  const std::string cmd = "ACBRIDGE_CONFIG_DIR=" + dir_.string() + " " + std::string(ACBRIDGE_CLI) + " --out " + path("cfg.txt") +
                          " --set run.seed=77 config 2> " + path("err.txt");
  ASSERT_EQ(std::system(cmd.c_str()), 0) << stderr_text();
  const std::string dumped = slurp(path("cfg.txt"));
  EXPECT_NE(dumped.find("sim.duration_s = 0.002\n"), std::string::npos) << dumped;
  EXPECT_NE(dumped.find("run.seed = 77\n"), std::string::npos) << dumped;
}

TEST_F(Cli, UnknownOverrideKeyIsValidationError) {
  EXPECT_EQ(run("--set sim.nonsense=1 config"), 2);
  EXPECT_NE(stderr_text().find("unknown key"), std::string::npos) << stderr_text();
}
