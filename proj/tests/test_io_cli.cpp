// Serialization formats (snapshots, manifests, number formatting, hashing)
// and end-to-end exercises of the command-line driver, including its
// exit-code contract and tamper detection.
#include <evs/io.hpp>
#include <evs/commands.hpp>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cfloat>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path work_root() {
  static fs::path root = [] {
    fs::path r = fs::temp_directory_path() / "evs_cli_tests";
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = work_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(EVS_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  EXPECT_TRUE(WIFEXITED(rc)) << "CLI did not exit normally: " << cmd;
  return WEXITSTATUS(rc);
}

int run_cli(const std::string& args) { return run_cli(args, work_root() / "scratch.log"); }

std::string slurp(const fs::path& p) {
  auto bytes = evs::read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return evs::read_file_bytes(a) == evs::read_file_bytes(b);
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string::npos) nl = s.size();
    lines.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t c = line.find(',', start);
    if (c == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, c - start));
    start = c + 1;
  }
}

}  // namespace

TEST(Io, NumberFormattingRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -0.0, DBL_MAX, 6.02214076e23, 0.0, -2.5e-7, 3.141592653589793}) {
    std::string s = evs::format_double(x);
    double back = evs::parse_double(s);
    EXPECT_EQ(std::signbit(back), std::signbit(x)) << s;
    EXPECT_EQ(back, x) << s;
  }
  // Shortest representation, not a fixed-width dump.
  EXPECT_EQ(evs::format_double(0.1), "0.1");
  EXPECT_EQ(evs::format_double(2.0), "2");
  EXPECT_THROW(evs::parse_double("abc"), evs::ConfigError);
  EXPECT_THROW(evs::parse_double("1.5x"), evs::ConfigError);
  EXPECT_THROW(evs::parse_double(""), evs::ConfigError);
}

TEST(Io, HashMatchesReferenceVectors) {
  auto h = [](const std::string& s) {
    return evs::fnv1a64(reinterpret_cast<const unsigned char*>(s.data()), s.size());
  };
  EXPECT_EQ(h(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(h("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(h("abc"), 0xe71fa2190541574bull);
  EXPECT_EQ(h("hello world"), 0x779a65e7023cd2e7ull);
  EXPECT_EQ(evs::hex64(0xcbf29ce484222325ull), "cbf29ce484222325");
  EXPECT_EQ(evs::hex64(0), "0000000000000000");
  fs::path p = work_root() / "hash_probe.txt";
  evs::write_text_file(p, "abc");
  EXPECT_EQ(evs::hash_file(p), "e71fa2190541574b");
}

TEST(Io, SnapshotRoundTripsBitExactly) {
  auto g = evs::make_grid(2, 8, 8);
  evs::Field f = evs::make_field(g, 3);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (double& v : f.data) v = u(rng);
  f.data[5] = -0.0;
  f.data[6] = 1e-308;

  fs::path p = work_root() / "snap.bin";
  evs::write_snapshot(p, g, f);
  // header: magic + version + d + m + two extents, then the payload
  EXPECT_EQ(fs::file_size(p), 24u + f.data.size() * 8u);

  evs::Snapshot s = evs::read_snapshot(p);
  EXPECT_EQ(s.d, 2);
  EXPECT_EQ(s.m, 3);
  EXPECT_EQ(s.n[0], 8);
  EXPECT_EQ(s.n[1], 8);
  ASSERT_EQ(s.data.size(), f.data.size());
  for (std::size_t i = 0; i < s.data.size(); ++i) EXPECT_EQ(s.data[i], f.data[i]);

  evs::Field back = evs::snapshot_to_field(g, s);
  fs::path p2 = work_root() / "snap2.bin";
  evs::write_snapshot(p2, g, back);
  EXPECT_TRUE(same_bytes(p, p2));

  auto mismatched = evs::make_grid(2, 16, 16);
  EXPECT_THROW(evs::snapshot_to_field(mismatched, s), evs::ConfigError);
}

TEST(Io, SnapshotRejectsCorruption) {
  auto g = evs::make_grid(1, 8);
  evs::Field f = evs::make_field(g, 1);
  for (int i = 0; i < 8; ++i) f.at(i, 0) = i;
  fs::path p = work_root() / "corrupt.bin";
  evs::write_snapshot(p, g, f);
  std::string good = slurp(p);

  auto write_mutated = [&](std::string bytes) {
    fs::path q = work_root() / "mutated.bin";
    evs::write_text_file(q, bytes);
    return q;
  };
  {
    std::string b = good;
    b[0] = 'F';
    EXPECT_THROW(evs::read_snapshot(write_mutated(b)), evs::ConfigError);
  }
  {
    std::string b = good;
    b[4] = 2;  // unsupported version
    EXPECT_THROW(evs::read_snapshot(write_mutated(b)), evs::ConfigError);
  }
  {
    std::string b = good;
    b[8] = 3;  // dimension out of range
    EXPECT_THROW(evs::read_snapshot(write_mutated(b)), evs::ConfigError);
  }
  {
    std::string b = good;
    b[12] = 0;  // zero components
    EXPECT_THROW(evs::read_snapshot(write_mutated(b)), evs::ConfigError);
  }
  {
    std::string b = good.substr(0, good.size() - 1);  // truncated payload
    EXPECT_THROW(evs::read_snapshot(write_mutated(b)), evs::ConfigError);
  }
  EXPECT_THROW(evs::read_snapshot(write_mutated("EV")), evs::ConfigError);
  EXPECT_THROW(evs::read_snapshot(work_root() / "does_not_exist.bin"), evs::ConfigError);
}

TEST(Io, ManifestRoundTripsAndValidates) {
  evs::RunManifest m;
  m.system = "mhd";
  m.a = 1.25;
  m.gamma = 1.4;
  m.mu = 3.5;
  m.grid = {32, 32};
  m.tfinal = 0.5;
  m.tsteps = 64;
  m.dict_modes = 2;
  m.tol = 1e-8;
  m.tol_step = 2.5e-8;
  m.init = "orszag-tang";
  m.stride = 1;
  m.windows = 16;
  m.energy_initial = 2.1953125;
  m.energy_final = 2.0;
  m.status = "complete";
  m.failed_step = -1;
  m.files = {{"field_000000.bin", "0011223344556677"}, {"timeseries.csv", "8899aabbccddeeff"}};
  m.wall_clock_utc = "2026-08-18T00:00:00Z";
  m.elapsed_seconds = 1.5;

  fs::path p = work_root() / "manifest.json";
  evs::write_manifest(p, m);
  evs::RunManifest r = evs::read_manifest(p);
  EXPECT_EQ(r.tool, m.tool);
  EXPECT_EQ(r.system, m.system);
  EXPECT_EQ(r.a, m.a);
  EXPECT_EQ(r.gamma, m.gamma);
  EXPECT_EQ(r.mu, m.mu);
  EXPECT_EQ(r.grid, m.grid);
  EXPECT_EQ(r.tfinal, m.tfinal);
  EXPECT_EQ(r.tsteps, m.tsteps);
  EXPECT_EQ(r.dict_modes, m.dict_modes);
  EXPECT_EQ(r.tol, m.tol);
  EXPECT_EQ(r.tol_step, m.tol_step);
  EXPECT_EQ(r.init, m.init);
  EXPECT_EQ(r.stride, m.stride);
  EXPECT_EQ(r.windows, m.windows);
  EXPECT_EQ(r.energy_initial, m.energy_initial);
  EXPECT_EQ(r.energy_final, m.energy_final);
  EXPECT_EQ(r.status, m.status);
  EXPECT_EQ(r.failed_step, m.failed_step);
  EXPECT_EQ(r.files, m.files);
  EXPECT_EQ(r.wall_clock_utc, m.wall_clock_utc);
  EXPECT_EQ(r.elapsed_seconds, m.elapsed_seconds);

  fs::path p2 = work_root() / "manifest2.json";
  evs::write_manifest(p2, r);
  EXPECT_TRUE(same_bytes(p, p2));

  fs::path bad = work_root() / "bad.json";
  evs::write_text_file(bad, "{not json");
  EXPECT_THROW(evs::read_manifest(bad), evs::ConfigError);
  evs::write_text_file(bad, "{}");
  EXPECT_THROW(evs::read_manifest(bad), evs::ConfigError);
}

TEST(Cli, RunProducesCertifiedArtifacts) {
  fs::path dir = fresh_dir("run_basic");
  fs::path log = work_root() / "run_basic.log";
  int rc = run_cli("run --system burgers --grid 64 --tsteps 16 --tfinal 0.2 --init sine:amp=1 --out " +
                       dir.string(),
                   log);
  ASSERT_EQ(rc, 0) << slurp(log);
  EXPECT_NE(slurp(log).find("run complete"), std::string::npos);

  evs::RunManifest man = evs::read_manifest(dir / "manifest.json");
  EXPECT_EQ(man.system, "burgers");
  EXPECT_EQ(man.status, "complete");
  EXPECT_EQ(man.tsteps, 16);
  EXPECT_EQ(man.grid, std::vector<int>({64}));
  EXPECT_EQ(man.files.size(), 18u);  // 17 snapshots + time series
  for (const auto& [name, hash] : man.files) EXPECT_EQ(evs::hash_file(dir / name), hash) << name;

  // Time series: constant certified majorant, monotone state energy, and a
  // nonnegative gap column equal to their difference.
  auto lines = split_lines(slurp(dir / "timeseries.csv"));
  ASSERT_EQ(lines.size(), 18u);
  EXPECT_EQ(lines[0], "t,E,mechE,gap,worst_residual,iterations");
  double prev_mech = evs::kInf;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv(lines[i]);
    ASSERT_EQ(cells.size(), 6u);
    double E = evs::parse_double(cells[1]);
    double mech = evs::parse_double(cells[2]);
    double gap = evs::parse_double(cells[3]);
    EXPECT_EQ(E, man.energy_initial);
    EXPECT_LE(mech, prev_mech + 1e-14);
    EXPECT_EQ(gap, E - mech);
    EXPECT_LE(evs::parse_double(cells[4]), man.tol_step);
    prev_mech = mech;
  }

  fs::path vlog = work_root() / "verify_basic.log";
  EXPECT_EQ(run_cli("verify " + dir.string(), vlog), 0) << slurp(vlog);
  EXPECT_NE(slurp(vlog).find("verify ok"), std::string::npos);
  EXPECT_TRUE(fs::is_regular_file(dir / "report.csv"));
}

TEST(Cli, RerunsAreByteIdentical) {
  fs::path a = fresh_dir("rerun_a");
  fs::path b = fresh_dir("rerun_b");
  std::string flags = "run --system mhd --mu 2 --grid 16 --tsteps 4 --tfinal 0.05 --init orszag-tang --out ";
  ASSERT_EQ(run_cli(flags + a.string()), 0);
  ASSERT_EQ(run_cli(flags + b.string()), 0);
  for (int n = 0; n <= 4; ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "field_%06d.bin", n);
    EXPECT_TRUE(same_bytes(a / name, b / name)) << name;
  }
  EXPECT_TRUE(same_bytes(a / "timeseries.csv", b / "timeseries.csv"));
}

TEST(Cli, VerifyDetectsCorruption) {
  fs::path dir = fresh_dir("tamper_hash");
  ASSERT_EQ(run_cli("run --system burgers --grid 64 --tsteps 16 --tfinal 0.2 --init sine:amp=1 --out " +
                    dir.string()),
            0);
  std::string bytes = slurp(dir / "field_000008.bin");
  bytes[25] = static_cast<char>(bytes[25] ^ 0xff);
  evs::write_text_file(dir / "field_000008.bin", bytes);
  fs::path log = work_root() / "tamper_hash.log";
  EXPECT_EQ(run_cli("verify " + dir.string(), log), 4);
  EXPECT_NE(slurp(log).find("integrity failure"), std::string::npos);
}

TEST(Cli, VerifyDetectsCertificateViolation) {
  // An inflated interior state with a refreshed hash passes the integrity
  // check, but its energy now exceeds the predecessor's, which no step
  // certificate can absorb.
  fs::path dir = fresh_dir("tamper_cert");
  ASSERT_EQ(run_cli("run --system burgers --grid 64 --tsteps 16 --tfinal 0.2 --init sine:amp=1 --out " +
                    dir.string()),
            0);
  evs::Snapshot s = evs::read_snapshot(dir / "field_000008.bin");
  for (double& v : s.data) v *= 1.001;
  auto g = evs::make_grid(1, 64);
  evs::write_snapshot(dir / "field_000008.bin", g, evs::snapshot_to_field(g, s));
  evs::RunManifest man = evs::read_manifest(dir / "manifest.json");
  man.files["field_000008.bin"] = evs::hash_file(dir / "field_000008.bin");
  evs::write_manifest(dir / "manifest.json", man);

  fs::path log = work_root() / "tamper_cert.log";
  EXPECT_EQ(run_cli("verify " + dir.string(), log), 5);
  EXPECT_NE(slurp(log).find("certificate violation"), std::string::npos);
}

TEST(Cli, ConfigurationErrorsExitTwo) {
  fs::path out = work_root() / "cfg_err_out";
  auto expect2 = [&](const std::string& args) {
    EXPECT_EQ(run_cli(args), 2) << args;
  };
  expect2("frobnicate --system burgers");
  expect2("run --system burgers --grid 64 --tfinal 0.1 --out " + out.string());  // missing tsteps
  expect2("run --system burgers --grid 64 --tsteps 4 --tfinal 0.1");             // missing out
  expect2("run --system nosuch --grid 64 --tsteps 4 --tfinal 0.1 --out " + out.string());
  expect2("run --system burgers --grid 48 --tsteps 4 --tfinal 0.1 --out " + out.string());
  expect2("run --system burgers --grid 64 --tsteps 4 --tfinal 0.1 --frillik 3 --out " + out.string());
  expect2("run --system compressible --gamma 1 --grid 64 --tsteps 4 --tfinal 0.1 --out " + out.string());
  expect2("run --system mhd --mu 0 --grid 16 --tsteps 4 --tfinal 0.1 --out " + out.string());
  expect2("run --system euler --grid 16 --tsteps 4 --tfinal 0.1 --init sine:amp=1 --out " + out.string());
  expect2("run --system burgers --grid 64 --tsteps 4 --tfinal 0.1 --stride 0 --out " + out.string());
  expect2("verify " + (work_root() / "no_such_run").string());
  expect2("compare");
}

TEST(Cli, StrideControlsEmission) {
  fs::path dir = fresh_dir("stride_run");
  ASSERT_EQ(run_cli("run --system burgers --grid 64 --tsteps 10 --tfinal 0.1 --init sine:amp=1 "
                    "--stride 5 --out " +
                    dir.string()),
            0);
  EXPECT_TRUE(fs::is_regular_file(dir / "field_000000.bin"));
  EXPECT_TRUE(fs::is_regular_file(dir / "field_000005.bin"));
  EXPECT_TRUE(fs::is_regular_file(dir / "field_000010.bin"));
  for (int n : {1, 2, 3, 4, 6, 7, 8, 9}) {
    char name[32];
    std::snprintf(name, sizeof(name), "field_%06d.bin", n);
    EXPECT_FALSE(fs::exists(dir / name)) << name;
  }
  // Certification needs the full trajectory.
  fs::path log = work_root() / "stride_verify.log";
  EXPECT_EQ(run_cli("verify " + dir.string(), log), 2);
  EXPECT_NE(slurp(log).find("stride-1"), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  fs::path unused = work_root() / "cfgfile_unused";
  fs::path dir = fresh_dir("cfgfile_run");
  fs::path cfg = work_root() / "run.cfg";
  evs::write_text_file(cfg,
                       "# scalar demo\n"
                       "system = burgers\n"
                       "grid = 64\n"
                       "tsteps = 8\n"
                       "tfinal = 0.1   # comment after value\n"
                       "init = sine:amp=0.8\n"
                       "out = " +
                           unused.string() + "\n");
  ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + dir.string()), 0);
  EXPECT_FALSE(fs::exists(unused));
  evs::RunManifest man = evs::read_manifest(dir / "manifest.json");
  EXPECT_EQ(man.system, "burgers");
  EXPECT_EQ(man.tsteps, 8);
  EXPECT_EQ(man.init, "sine:amp=0.8");
  // Malformed config line is a configuration error.
  evs::write_text_file(cfg, "system burgers\n");
  EXPECT_EQ(run_cli("run " + cfg.string() + " --out " + dir.string()), 2);
}

TEST(Cli, CompareFitsConvergenceOrder) {
  fs::path a = fresh_dir("order_a");
  fs::path b = fresh_dir("order_b");
  std::string base = "run --system burgers --grid 64 --tfinal 0.1 --init sine:amp=1 ";
  ASSERT_EQ(run_cli(base + "--tsteps 8 --out " + a.string()), 0);
  ASSERT_EQ(run_cli(base + "--tsteps 16 --out " + b.string()), 0);
  fs::path log = work_root() / "order.log";
  EXPECT_EQ(run_cli("compare " + a.string() + " " + b.string(), log), 0);
  std::string text = slurp(log);
  EXPECT_NE(text.find("fitted order"), std::string::npos) << text;
  auto lines = split_lines(slurp(a / "oracle_error.csv"));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "tsteps,grid,l1_error");
}

TEST(Cli, CompareChecksWeakStrongBound) {
  fs::path dir = fresh_dir("ws_run");
  ASSERT_EQ(run_cli("run --system euler --grid 16 --tsteps 4 --tfinal 0.05 --init taylor-green --out " +
                    dir.string()),
            0);
  fs::path log = work_root() / "ws.log";
  EXPECT_EQ(run_cli("compare " + dir.string(), log), 0);
  std::string text = slurp(log);
  EXPECT_NE(text.find("Ktilde"), std::string::npos) << text;
  EXPECT_NE(text.find("satisfied"), std::string::npos) << text;
  auto lines = split_lines(slurp(dir / "weak_strong.csv"));
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "t,R,W,gap,bound");
}

TEST(Cli, CompareWithoutReferenceExitsSix) {
  fs::path dir = fresh_dir("nooracle_mhd");
  ASSERT_EQ(run_cli("run --system mhd --mu 2 --grid 16 --tsteps 2 --tfinal 0.02 --init orszag-tang --out " +
                    dir.string()),
            0);
  fs::path log = work_root() / "nooracle.log";
  EXPECT_EQ(run_cli("compare " + dir.string(), log), 6);
  EXPECT_NE(slurp(log).find("no reference solution"), std::string::npos);

  fs::path dir2 = fresh_dir("nooracle_burgers");
  ASSERT_EQ(run_cli("run --system burgers --grid 64 --tsteps 2 --tfinal 0.02 --init constant:0.3 --out " +
                    dir2.string()),
            0);
  EXPECT_EQ(run_cli("compare " + dir2.string(), log), 6);
}

TEST(Cli, HypothesisBatterySmoke) {
  fs::path log = work_root() / "hypo.log";
  ASSERT_EQ(run_cli("check-hypothesis --system burgers --samples 300", log), 0) << slurp(log);
  std::string text = slurp(log);
  EXPECT_EQ(text.find("FAIL"), std::string::npos) << text;
  int passes = 0;
  for (std::size_t pos = text.find("PASS"); pos != std::string::npos; pos = text.find("PASS", pos + 1))
    ++passes;
  EXPECT_GE(passes, 5) << text;
}

TEST(Cli, ZeroStateIsExactFixedPoint) {
  fs::path dir = fresh_dir("zero_run");
  ASSERT_EQ(run_cli("run --system euler --grid 16 --tsteps 3 --tfinal 0.03 --init zero --out " +
                    dir.string()),
            0);
  auto lines = split_lines(slurp(dir / "timeseries.csv"));
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_csv(lines[i]);
    EXPECT_EQ(evs::parse_double(cells[1]), 0.0);
    EXPECT_EQ(evs::parse_double(cells[2]), 0.0);
    EXPECT_EQ(evs::parse_double(cells[3]), 0.0);
    EXPECT_EQ(cells[5], "0");
  }
}
