// Acceptance gate: every shipped guarantee re-checked end to end, one
// verdict line per criterion.
//
//  1  hypothesis batteries (Fenchel gap, entropy-flux identity, convexity,
//     K-homogeneity) for all four systems
//  2  certified soundness of the reference runs (per-step certificates and
//     monotone energy)
//  3  conservation of mass / mean velocity by certification
//  4  weak-strong comparison against the steady vortex oracle
//  5  scalar oracle equivalence: pre-shock convergence order, post-shock
//     energy defect
//  6  structural properties: semi-flow re-execution, solution-set convexity
//     probe, scaling limit of window residuals
//  7  prolongation energy identity
//  8  infrastructure: thread-count independence and the CLI exit-code
//     contract
#include <evs/commands.hpp>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, bool ok, const std::string& detail) {
  std::cout << "ACCEPTANCE " << id << (ok ? " PASS: " : " FAIL: ") << detail << std::endl;
  EXPECT_TRUE(ok) << "criterion " << id << ": " << detail;
}

std::string fmt(double x) { return evs::format_double(x); }

/// One certified reference run with everything needed to re-check it.
struct SystemRun {
  evs::SystemSpec sys;
  evs::Grid g;
  evs::Dictionary dict;
  evs::DictionaryTables tables;
  evs::Trajectory traj;
  double tol_step = 0.0;

  SystemRun(evs::SystemSpec s, evs::Grid grid, const std::string& init, double T, int N)
      : sys(std::move(s)), g(std::move(grid)), dict(evs::build_dictionary(sys, 2)), tables(sys, dict, g) {
    evs::Field U0 = evs::initial_data(sys, g, init);
    sys.project_state(g, U0);
    double e0 = evs::total_entropy(sys.entropy(), g, U0).value;
    evs::StepConfig cfg;
    cfg.tau = T / static_cast<double>(N);
    cfg.tol_step = evs::resolve_tolerance(1e-8, e0);
    tol_step = cfg.tol_step;
    traj = evs::run(sys, g, tables, U0, T, N, cfg);
  }
};

/// The four reference runs of criterion 2, built once and reused by the
/// criteria that re-examine the stored trajectories.
struct SharedRuns {
  std::unique_ptr<SystemRun> burgers, euler, mhd, compressible;
  double build_seconds = 0.0;

  static const SharedRuns& get() {
    static SharedRuns runs;
    return runs;
  }

 private:
  SharedRuns() {
    auto t0 = Clock::now();
    burgers = std::make_unique<SystemRun>(evs::SystemSpec(evs::SystemTag::burgers, 1), evs::make_grid(1, 256),
                                          "sine:amp=1", 0.3, 128);
    euler = std::make_unique<SystemRun>(evs::SystemSpec(evs::SystemTag::euler, 2), evs::make_grid(2, 32, 32),
                                        "taylor-green", 0.5, 64);
    mhd = std::make_unique<SystemRun>(evs::SystemSpec(evs::SystemTag::mhd, 2, 1.0, 1.4, 1.0),
                                      evs::make_grid(2, 32, 32), "orszag-tang", 0.5, 64);
    compressible = std::make_unique<SystemRun>(evs::SystemSpec(evs::SystemTag::compressible, 1, 1.0, 1.4),
                                               evs::make_grid(1, 256), "gauss-density:amp=0.3,width=0.1",
                                               0.1, 128);
    build_seconds = seconds_since(t0);
  }
};

const std::array<std::string, 4> kSystemNames = {"burgers", "euler", "mhd", "compressible"};

const SystemRun& shared_run(const std::string& name) {
  const SharedRuns& r = SharedRuns::get();
  if (name == "burgers") return *r.burgers;
  if (name == "euler") return *r.euler;
  if (name == "mhd") return *r.mhd;
  return *r.compressible;
}

fs::path accept_root() {
  static fs::path root = [] {
    fs::path r = fs::temp_directory_path() / "evs_acceptance";
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return root;
}

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  fs::path log = accept_root() / "cli.log";
  std::string cmd = env_prefix + std::string(EVS_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  EXPECT_TRUE(WIFEXITED(rc)) << cmd;
  return WEXITSTATUS(rc);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return evs::read_file_bytes(a) == evs::read_file_bytes(b);
}

}  // namespace

TEST(Acceptance, Criterion1HypothesisBatteries) {
  auto t0 = Clock::now();
  bool ok = true;
  std::string worst_note;
  for (const std::string& name : kSystemNames) {
    evs::CliConfig cfg;
    cfg.system = name;
    cfg.samples = 10000;  // 10^4 Fenchel probes, 50 identity probes, 100 convexity probes
    cfg.mu = 1.0;
    std::ostringstream captured;
    std::streambuf* saved = std::cout.rdbuf(captured.rdbuf());
    int rc = evs::cmd_check_hypothesis(cfg);
    std::cout.rdbuf(saved);
    if (rc != 0) {
      ok = false;
      worst_note += " [" + name + " battery failed: " + captured.str() + "]";
    }
  }
  double elapsed = seconds_since(t0);
  if (elapsed > 60.0) ok = false;
  report(1, ok,
         "Fenchel/identity/convexity/homogeneity batteries on 4 systems in " + fmt(elapsed) + " s" +
             worst_note);
}

TEST(Acceptance, Criterion2CertifiedSoundness) {
  const SharedRuns& runs = SharedRuns::get();
  bool ok = true;
  double worst_rel = -evs::kInf;
  std::string detail;
  for (const std::string& name : kSystemNames) {
    const SystemRun& r = shared_run(name);
    double worst = -evs::kInf;
    bool monotone = true;
    for (std::size_t n = 0; n < r.traj.certs.size(); ++n) {
      worst = std::max(worst, r.traj.certs[n].r_star);
      if (r.traj.energy[n + 1] > r.traj.energy[n] + r.tol_step) monotone = false;
    }
    if (worst > r.tol_step || !monotone) ok = false;
    worst_rel = std::max(worst_rel, worst / r.tol_step);
    detail += name + " r*/tol " + fmt(worst / r.tol_step) + (monotone ? "" : " NOT MONOTONE") + "; ";
  }
  if (runs.build_seconds > 240.0) ok = false;
  report(2, ok, detail + "built in " + fmt(runs.build_seconds) + " s");
}

TEST(Acceptance, Criterion3ConservationByCertification) {
  bool ok = true;
  std::string detail;
  {
    const SystemRun& r = shared_run("compressible");
    double m0 = evs::mean_component(r.g, r.traj.states[0], 0);
    double worst = 0.0;
    for (const evs::Field& s : r.traj.states)
      worst = std::max(worst, std::abs(evs::mean_component(r.g, s, 0) - m0));
    double budget = static_cast<double>(r.traj.nsteps) * r.tol_step;
    if (worst > budget) ok = false;
    detail += "mass drift " + fmt(worst) + " <= " + fmt(budget) + "; ";
  }
  for (const std::string& name : {std::string("euler"), std::string("mhd")}) {
    const SystemRun& r = shared_run(name);
    double worst = 0.0;
    for (int c = 0; c < 2; ++c) {
      double m0 = evs::mean_component(r.g, r.traj.states[0], c);
      for (const evs::Field& s : r.traj.states)
        worst = std::max(worst, std::abs(evs::mean_component(r.g, s, c) - m0));
    }
    double budget = static_cast<double>(r.traj.nsteps) * r.tol_step;
    if (worst > budget) ok = false;
    detail += name + " mean-velocity drift " + fmt(worst) + "; ";
  }
  report(3, ok, detail);
}

TEST(Acceptance, Criterion4WeakStrongComparison) {
  const SystemRun& r = shared_run("euler");
  auto oracle = evs::classical_euler2d(r.g, r.traj.states[0], 0.5, 128, 64);
  evs::RelativeEntropyTrace tr = evs::weak_strong_report(r.sys, r.g, r.traj, oracle);
  bool bound_ok = tr.bound_satisfied;
  double worst_margin = evs::kInf;
  for (std::size_t i = 0; i < tr.R.size(); ++i) {
    if (tr.R[i] + tr.gap[i] > tr.bound[i]) bound_ok = false;
    worst_margin = std::min(worst_margin, tr.bound[i] - (tr.R[i] + tr.gap[i]));
  }
  const evs::Field& ref = oracle.states.back();
  evs::Field diff = r.traj.states.back();
  for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= ref.data[i];
  double err = std::sqrt(evs::inner(r.g, diff, diff));
  double ref_norm = std::sqrt(evs::inner(r.g, ref, ref));
  bool l2_ok = err <= 0.05 * ref_norm;
  report(4, bound_ok && l2_ok,
         "Gronwall margin " + fmt(worst_margin) + ", Ktilde " + fmt(tr.ktilde) + ", final L2 error " +
             fmt(err) + " <= " + fmt(0.05 * ref_norm));
}

TEST(Acceptance, Criterion5OracleEquivalence) {
  // Pre-shock refinement family against the characteristics solution.
  evs::SystemSpec sys(evs::SystemTag::burgers, 1);
  evs::Grid g = evs::make_grid(1, 256);
  evs::Dictionary dict = evs::build_dictionary(sys, 2);
  evs::DictionaryTables tables(sys, dict, g);
  evs::Field U0 = evs::initial_data(sys, g, "sine:amp=1");
  double e0 = evs::total_entropy(sys.entropy(), g, U0).value;
  const double T = 0.1;
  std::vector<double> taus, errs;
  bool decreasing = true;
  for (int N : {32, 64, 128, 256}) {
    evs::StepConfig cfg;
    cfg.tau = T / static_cast<double>(N);
    cfg.tol_step = evs::resolve_tolerance(1e-8, e0);
    evs::Trajectory traj = evs::run(sys, g, tables, U0, T, N, cfg);
    evs::StableSum l1;
    for (int i = 0; i < g.nx(); ++i)
      l1.add(std::abs(traj.states.back().at(i, 0) - evs::burgers_exact(1.0, T, g.coord(0, i))));
    double err = l1.value() / static_cast<double>(g.nx());
    if (!errs.empty() && err >= errs.back()) decreasing = false;
    taus.push_back(cfg.tau);
    errs.push_back(err);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double x = std::log(taus[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double nval = static_cast<double>(taus.size());
  double order = (nval * sxy - sx * sy) / (nval * sxx - sx * sx);
  bool order_ok = decreasing && order >= 0.8;

  // Post-shock: the certified gap is nonnegative and strictly grows once the
  // shock has formed.
  const SystemRun& r = shared_run("burgers");
  double tstar = evs::burgers_shock_time(1.0);
  bool gap_ok = true;
  double prev_gap = 0.0;
  for (int n = 0; n <= r.traj.nsteps; ++n) {
    double gap = r.traj.energy[0] - r.traj.energy[static_cast<std::size_t>(n)];
    if (gap < -1e-15) gap_ok = false;
    if (n > 0 && r.traj.time_at(n - 1) >= tstar && gap <= prev_gap) gap_ok = false;
    prev_gap = gap;
  }
  report(5, order_ok && gap_ok,
         "pre-shock fitted order " + fmt(order) + " (errors " + fmt(errs.front()) + " -> " +
             fmt(errs.back()) + "), post-shock gap strictly increasing after t*=" + fmt(tstar) + ": " +
             (gap_ok ? "yes" : "no"));
}

TEST(Acceptance, Criterion6StructuralProperties) {
  const SystemRun& r = shared_run("burgers");
  // Semi-flow: restarting from the midpoint state reproduces the tail.
  const int k = 64, rest = r.traj.nsteps - k;
  evs::StepConfig cfg = r.traj.cfg;
  evs::Trajectory tail =
      evs::run(r.sys, r.g, r.tables, r.traj.states[static_cast<std::size_t>(k)],
               cfg.tau * static_cast<double>(rest), rest, cfg);
  double worst_restart = 0.0;
  for (int j = 0; j <= rest; ++j)
    for (std::size_t i = 0; i < tail.states[static_cast<std::size_t>(j)].data.size(); ++i)
      worst_restart = std::max(worst_restart,
                               std::abs(tail.states[static_cast<std::size_t>(j)].data[i] -
                                        r.traj.states[static_cast<std::size_t>(k + j)].data[i]));
  bool semiflow_ok = worst_restart <= 1e-9;

  // Solution-set convexity: blend against an independently certified
  // contraction of the same evolution.
  evs::Trajectory second = r.traj;
  const double shrink = 1.0 - 1e-6;
  for (int n = 1; n <= second.nsteps; ++n) {
    for (double& v : second.states[static_cast<std::size_t>(n)].data) v *= shrink;
    second.energy[static_cast<std::size_t>(n)] =
        evs::total_entropy(r.sys.entropy(), r.g, second.states[static_cast<std::size_t>(n)]).value;
  }
  for (int n = 1; n <= second.nsteps; ++n)
    second.certs[static_cast<std::size_t>(n - 1)] =
        r.tables.certify(second.states[static_cast<std::size_t>(n - 1)],
                         second.energy[static_cast<std::size_t>(n - 1)],
                         second.states[static_cast<std::size_t>(n)], cfg.tau);
  bool probe_ok = true;
  double worst_probe = -evs::kInf;
  for (double lambda : {0.25, 0.5, 0.75}) {
    auto rep = evs::solution_set_probe(r.sys, r.g, r.tables, r.traj, second, lambda);
    worst_probe = std::max(worst_probe, rep.max_excess);
    if (rep.max_excess > 0.0) probe_ok = false;
  }

  // Scaling limit: window residuals are affine in the test-function scale,
  // so r(alpha)/alpha increases monotonically to the linear part.
  auto path = evs::as_pair_path(r.traj);
  auto rt = evs::build_residual_tables(r.sys, r.g, r.tables, path);
  bool scaling_ok = true;
  for (int m = 0; m < r.tables.member_count(); m += 3) {
    double L = rt.linear_part(0, r.traj.nsteps, m);
    double e = rt.energy_part(0, r.traj.nsteps);
    double prev = -evs::kInf;
    for (double alpha : {1.0, 10.0, 100.0, 1000.0}) {
      double q = rt.residual(0, r.traj.nsteps, m, alpha) / alpha;
      if (q < prev - 1e-15) scaling_ok = false;
      prev = q;
      if (std::abs(q - L) > std::abs(e) / alpha + 1e-12 * (1.0 + std::abs(L))) scaling_ok = false;
    }
  }
  report(6, semiflow_ok && probe_ok && scaling_ok,
         "restart deviation " + fmt(worst_restart) + " <= 1e-9, probe max excess " + fmt(worst_probe) +
             " <= 0, scaling limit " + (scaling_ok ? "confirmed" : "violated"));
}

TEST(Acceptance, Criterion7ProlongationIdentity) {
  bool ok = true;
  std::string detail;
  for (const std::string& name : kSystemNames) {
    const SystemRun& r = shared_run(name);
    const int N = r.traj.nsteps;
    const double tau = r.traj.T / static_cast<double>(N);
    evs::StableSum l1;
    for (int n = 1; n <= N; ++n) {
      double t_mid = (static_cast<double>(n) - 0.5) * tau;
      evs::ProlongedPair p = evs::prolongate(r.traj, t_mid);
      l1.add(tau * std::abs(p.e_before - p.e_at));
    }
    double expected = tau * (r.traj.energy[0] - r.traj.energy[static_cast<std::size_t>(N)]);
    double defect = std::abs(l1.value() - expected);
    if (defect > 1e-12) ok = false;
    detail += name + " defect " + fmt(defect) + "; ";
  }
  report(7, ok, detail + "identity tolerance 1e-12");
}

TEST(Acceptance, Criterion8Infrastructure) {
  fs::path root = accept_root();
  bool ok = true;
  std::string detail;

  // Byte-identical output for different worker counts.
  fs::path t1 = root / "threads1", t4 = root / "threads4";
  std::string mhd_flags = "run --system mhd --mu 2 --grid 16 --tsteps 4 --tfinal 0.05 --init orszag-tang";
  if (run_cli(mhd_flags + " --out " + t1.string(), "EVS_THREADS=1 ") != 0) ok = false;
  if (run_cli(mhd_flags + " --out " + t4.string(), "EVS_THREADS=4 ") != 0) ok = false;
  bool threads_identical = true;
  for (int n = 0; n <= 4; ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "field_%06d.bin", n);
    if (!same_bytes(t1 / name, t4 / name)) threads_identical = false;
  }
  if (!same_bytes(t1 / "timeseries.csv", t4 / "timeseries.csv")) threads_identical = false;
  if (!threads_identical) ok = false;
  detail += std::string("EVS_THREADS {1,4} byte-identical: ") + (threads_identical ? "yes" : "NO") + "; ";

  // Exit-code contract with negative tests.
  fs::path good = root / "exitcodes";
  int rc_run =
      run_cli("run --system burgers --grid 64 --tsteps 8 --tfinal 0.1 --init sine:amp=1 --out " +
              good.string());
  int rc_verify = run_cli("verify " + good.string());

  fs::path tampered = root / "exitcodes_hash";
  fs::copy(good, tampered, fs::copy_options::recursive);
  {
    auto bytes = evs::read_file_bytes(tampered / "field_000004.bin");
    bytes[25] ^= 0xff;
    evs::write_text_file(tampered / "field_000004.bin", std::string(bytes.begin(), bytes.end()));
  }
  int rc_hash = run_cli("verify " + tampered.string());

  fs::path forged = root / "exitcodes_cert";
  fs::copy(good, forged, fs::copy_options::recursive);
  {
    evs::Snapshot s = evs::read_snapshot(forged / "field_000004.bin");
    for (double& v : s.data) v *= 1.001;  // energy above the predecessor: uncertifiable
    evs::Grid g = evs::make_grid(1, 64);
    evs::write_snapshot(forged / "field_000004.bin", g, evs::snapshot_to_field(g, s));
    evs::RunManifest man = evs::read_manifest(forged / "manifest.json");
    man.files["field_000004.bin"] = evs::hash_file(forged / "field_000004.bin");
    evs::write_manifest(forged / "manifest.json", man);
  }
  int rc_cert = run_cli("verify " + forged.string());

  int rc_cfg = run_cli("run --system compressible --gamma 1 --grid 64 --tsteps 4 --tfinal 0.1 --out " +
                       (root / "rejected").string());
  int rc_oracle = run_cli("compare " + t1.string());

  bool exits_ok = rc_run == 0 && rc_verify == 0 && rc_hash == 4 && rc_cert == 5 && rc_cfg == 2 &&
                  rc_oracle == 6;
  if (!exits_ok) ok = false;
  detail += "exit codes run/verify/hash/cert/config/oracle = " + std::to_string(rc_run) + "/" +
            std::to_string(rc_verify) + "/" + std::to_string(rc_hash) + "/" + std::to_string(rc_cert) +
            "/" + std::to_string(rc_cfg) + "/" + std::to_string(rc_oracle) + " (want 0/0/4/5/2/6)";
  report(8, ok, detail);
}
