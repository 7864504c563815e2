#pragma once

// CLI front end: configuration parsing (flat key=value config file plus flag
// overrides, flags win), the initial-data catalogue, and the four command
// drivers with their exit-code contract:
//   0 success, 2 configuration error, 3 step failure, 4 artifact integrity
//   failure, 5 certificate/budget violation, 6 no reference solution.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evs/diagnostics.hpp"
#include "evs/dictionary.hpp"
#include "evs/entropy.hpp"
#include "evs/errors.hpp"
#include "evs/grid.hpp"
#include "evs/io.hpp"
#include "evs/oracles.hpp"
#include "evs/stepper.hpp"
#include "evs/system.hpp"
#include "evs/testfunction.hpp"

namespace evs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStep = 3;
inline constexpr int kExitIntegrity = 4;
inline constexpr int kExitBudget = 5;
inline constexpr int kExitNoOracle = 6;

// ---------------------------------------------------------------------------
// Configuration

struct CliConfig {
    std::string system;
    int grid = 0;
    int grid_y = 0;
    int tsteps = 0;
    double tfinal = 0.0;
    double gamma = 1.4;
    double a = 1.0;
    double mu = 1.0;
    int dict_modes = 2;
    double tol = 1e-8;  // relative certificate tolerance
    std::string init = "zero";
    std::string out;
    int stride = 1;
    int windows = 16;
    bool windows_set = false;
    int samples = 10000;
    std::vector<std::string> positional;
};

namespace detail_cli {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline int parse_int(const std::string& s) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("cannot parse integer: " + s);
    return v;
}

inline void apply_kv(CliConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "system")
        cfg.system = value;
    else if (key == "grid")
        cfg.grid = parse_int(value);
    else if (key == "grid-y" || key == "grid_y")
        cfg.grid_y = parse_int(value);
    else if (key == "tsteps")
        cfg.tsteps = parse_int(value);
    else if (key == "tfinal")
        cfg.tfinal = parse_double(value);
    else if (key == "gamma")
        cfg.gamma = parse_double(value);
    else if (key == "a")
        cfg.a = parse_double(value);
    else if (key == "mu")
        cfg.mu = parse_double(value);
    else if (key == "dict-modes" || key == "dict_modes")
        cfg.dict_modes = parse_int(value);
    else if (key == "tol")
        cfg.tol = parse_double(value);
    else if (key == "init")
        cfg.init = value;
    else if (key == "out")
        cfg.out = value;
    else if (key == "stride")
        cfg.stride = parse_int(value);
    else if (key == "windows") {
        cfg.windows = parse_int(value);
        cfg.windows_set = true;
    } else if (key == "samples")
        cfg.samples = parse_int(value);
    else
        throw ConfigError("unknown option: " + key);
}

inline void load_config_file(CliConfig& cfg, const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        std::size_t last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line is not key=value: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? std::string() : value.substr(vs);
        apply_kv(cfg, key, value);
    }
}

inline std::string timestamp_utc() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

inline std::string snapshot_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "field_%06d.bin", step);
    return buf;
}

/// "name:k=v,k=v" or "name:v1,v2" payload split.
struct InitSpec {
    std::string name;
    std::string payload;
    std::map<std::string, std::string> kv;
    std::vector<std::string> list;
};

inline InitSpec parse_init(const std::string& s) {
    InitSpec spec;
    std::size_t colon = s.find(':');
    spec.name = s.substr(0, colon == std::string::npos ? s.size() : colon);
    if (colon != std::string::npos) spec.payload = s.substr(colon + 1);
    if (!spec.payload.empty()) {
        spec.list = split(spec.payload, ',');
        for (const std::string& item : spec.list) {
            std::size_t eq = item.find('=');
            if (eq != std::string::npos) spec.kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    return spec;
}

inline double kv_double(const InitSpec& spec, const std::string& key, double fallback) {
    auto it = spec.kv.find(key);
    return it == spec.kv.end() ? fallback : parse_double(it->second);
}

}  // namespace detail_cli

inline CliConfig parse_cli(const std::vector<std::string>& args) {
    CliConfig cfg;
    std::vector<std::pair<std::string, std::string>> flags;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) == 0) {
            std::string key = arg.substr(2);
            std::string value;
            std::size_t eq = key.find('=');
            if (eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else {
                if (i + 1 >= args.size()) throw ConfigError("missing value for --" + key);
                value = args[++i];
            }
            flags.emplace_back(key, value);
        } else {
            cfg.positional.push_back(arg);
        }
    }
    // config file (if the first positional names one) loads first; flags win
    if (!cfg.positional.empty() && std::filesystem::is_regular_file(cfg.positional[0]) &&
        cfg.positional[0].size() > 4 && cfg.positional[0].substr(cfg.positional[0].size() - 4) != ".bin") {
        bool looks_like_config = cfg.positional[0].find(".json") == std::string::npos;
        if (looks_like_config && !std::filesystem::is_directory(cfg.positional[0])) {
            // only treat as config when it parses as key=value text
            try {
                detail_cli::load_config_file(cfg, cfg.positional[0]);
                cfg.positional.erase(cfg.positional.begin());
            } catch (const ConfigError&) {
                // leave it as a positional argument (e.g. a run directory)
            }
        }
    }
    for (const auto& [key, value] : flags) detail_cli::apply_kv(cfg, key, value);
    return cfg;
}

// ---------------------------------------------------------------------------
// System/grid construction and the initial-data catalogue

inline SystemSpec make_system(const CliConfig& cfg) {
    if (cfg.system.empty()) throw ConfigError("missing --system");
    SystemTag tag = parse_system_tag(cfg.system);
    int d = 1;
    if (tag == SystemTag::euler || tag == SystemTag::mhd)
        d = 2;
    else if (tag == SystemTag::compressible)
        d = cfg.grid_y > 0 ? 2 : 1;
    return SystemSpec(tag, d, cfg.a, cfg.gamma, cfg.mu);
}

inline Grid make_run_grid(const CliConfig& cfg, int d) {
    if (cfg.grid <= 0) throw ConfigError("missing --grid");
    return make_grid(d, cfg.grid, d == 2 ? (cfg.grid_y > 0 ? cfg.grid_y : cfg.grid) : 0);
}

/// Build initial data from its descriptor. Catalogue: zero | constant:v,...
/// | sine:amp=A | taylor-green | orszag-tang | gauss-density:amp=A,width=W
/// | file:<snapshot path>.
inline Field initial_data(const SystemSpec& sys, const Grid& g, const std::string& descriptor) {
    using detail_cli::parse_init;
    detail_cli::InitSpec spec = parse_init(descriptor);
    const int m = sys.components();
    Field f = make_field(g, m);
    if (spec.name == "zero") return f;
    if (spec.name == "constant") {
        if (spec.list.empty()) throw ConfigError("constant initial data needs values");
        if (static_cast<int>(spec.list.size()) != 1 && static_cast<int>(spec.list.size()) != m)
            throw ConfigError("constant initial data needs 1 or " + std::to_string(m) + " values");
        std::vector<double> vals;
        for (const std::string& s : spec.list) vals.push_back(parse_double(s));
        for (int i = 0; i < g.total(); ++i)
            for (int c = 0; c < m; ++c)
                f.at(i, c) = static_cast<int>(vals.size()) == m ? vals[static_cast<std::size_t>(c)]
                                                                : (c == 0 ? vals[0] : 0.0);
        return f;
    }
    if (spec.name == "sine") {
        if (sys.tag() != SystemTag::burgers) throw ConfigError("sine initial data is defined for the scalar system");
        double amp = detail_cli::kv_double(spec, "amp", 1.0);
        for (int i = 0; i < g.nx(); ++i) f.at(i, 0) = amp * std::sin(kTwoPi * g.coord(0, i));
        return f;
    }
    if (spec.name == "taylor-green") {
        if (sys.tag() != SystemTag::euler) throw ConfigError("taylor-green initial data needs the incompressible system");
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                int i = ix + g.nx() * iy;
                double x = g.coord(0, ix), y = g.coord(1, iy);
                f.at(i, 0) = std::sin(kTwoPi * x) * std::cos(kTwoPi * y);
                f.at(i, 1) = -std::cos(kTwoPi * x) * std::sin(kTwoPi * y);
            }
        return f;
    }
    if (spec.name == "orszag-tang") {
        if (sys.tag() != SystemTag::mhd) throw ConfigError("orszag-tang initial data needs the magnetohydrodynamic system");
        for (int iy = 0; iy < g.ny(); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                int i = ix + g.nx() * iy;
                double x = g.coord(0, ix), y = g.coord(1, iy);
                f.at(i, 0) = -std::sin(kTwoPi * y);
                f.at(i, 1) = std::sin(kTwoPi * x);
                f.at(i, 2) = -0.5 * std::sin(kTwoPi * y);
                f.at(i, 3) = 0.5 * std::sin(2.0 * kTwoPi * x);
            }
        return f;
    }
    if (spec.name == "gauss-density") {
        if (sys.tag() != SystemTag::compressible)
            throw ConfigError("gauss-density initial data needs the compressible system");
        double amp = detail_cli::kv_double(spec, "amp", 0.3);
        double width = detail_cli::kv_double(spec, "width", 0.1);
        if (width <= 0.0) throw ConfigError("gauss-density width must be positive");
        auto dist2 = [](double u) {
            double du = std::abs(u - 0.5);
            du = std::min(du, 1.0 - du);
            return du * du;
        };
        for (int iy = 0; iy < std::max(1, g.dim() == 2 ? g.ny() : 1); ++iy)
            for (int ix = 0; ix < g.nx(); ++ix) {
                int i = ix + g.nx() * iy;
                double r2 = dist2(g.coord(0, ix));
                if (g.dim() == 2) r2 += dist2(g.coord(1, iy));
                f.at(i, 0) = 1.0 + amp * std::exp(-r2 / (2.0 * width * width));
            }
        return f;
    }
    if (spec.name == "file") {
        if (spec.payload.empty()) throw ConfigError("file initial data needs a path");
        Snapshot s = read_snapshot(spec.payload);
        Field loaded = snapshot_to_field(g, s);
        if (loaded.m != m) throw ConfigError("snapshot component count does not match the system");
        return loaded;
    }
    throw ConfigError("unknown initial data: " + spec.name);
}

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const CliConfig& cfg) {
    if (cfg.tsteps < 1) throw ConfigError("missing --tsteps");
    if (cfg.tfinal <= 0.0) throw ConfigError("missing --tfinal");
    if (cfg.out.empty()) throw ConfigError("missing --out");
    if (cfg.stride < 1) throw ConfigError("--stride must be >= 1");
    auto t_begin = std::chrono::steady_clock::now();

    SystemSpec sys = make_system(cfg);
    Grid g = make_run_grid(cfg, sys.dim());
    Field U = initial_data(sys, g, cfg.init);
    sys.project_state(g, U);
    EnergyValue e0 = total_entropy(sys.entropy(), g, U);
    if (!e0.finite) throw ConfigError("initial data has infinite entropy");

    Dictionary dict = build_dictionary(sys, cfg.dict_modes);
    DictionaryTables tables(sys, dict, g);

    StepConfig sc;
    sc.tau = cfg.tfinal / static_cast<double>(cfg.tsteps);
    sc.dict_modes = cfg.dict_modes;
    sc.tol_step = resolve_tolerance(cfg.tol, e0.value);

    std::filesystem::path outdir(cfg.out);
    std::filesystem::create_directories(outdir);
    RunManifest man;
    man.system = sys.name();
    man.a = sys.entropy().a();
    man.gamma = sys.entropy().gamma();
    man.mu = sys.entropy().mu();
    for (int ax = 0; ax < g.dim(); ++ax) man.grid.push_back(g.extent(ax));
    man.tfinal = cfg.tfinal;
    man.tsteps = cfg.tsteps;
    man.dict_modes = cfg.dict_modes;
    man.tol = cfg.tol;
    man.tol_step = sc.tol_step;
    man.init = cfg.init;
    man.stride = cfg.stride;
    man.windows = cfg.windows;
    man.energy_initial = e0.value;
    man.wall_clock_utc = detail_cli::timestamp_utc();

    std::vector<double> energy{e0.value};
    std::vector<StepCertificate> certs;
    auto emit_snapshot = [&](int n, const Field& state) {
        std::string name = detail_cli::snapshot_name(n);
        write_snapshot(outdir / name, g, state);
        man.files[name] = hash_file(outdir / name);
    };
    emit_snapshot(0, U);

    int done = 0;
    bool failed = false;
    for (int n = 1; n <= cfg.tsteps; ++n) {
        try {
            auto [next, cert] = step(sys, g, tables, U, energy.back(), sc);
            U = std::move(next);
            energy.push_back(cert.e_next);
            certs.push_back(cert);
            if (n % cfg.stride == 0 || n == cfg.tsteps) emit_snapshot(n, U);
            done = n;
        } catch (const StepFailure& ex) {
            man.status = "failed";
            man.failed_step = n;
            std::cerr << "step " << n << " failed: certificate " << format_double(ex.cert.r_star)
                      << " above tolerance " << format_double(sc.tol_step) << "\n";
            failed = true;
            break;
        }
    }

    // time series: the pair reported is (U, E0) with the constant certified
    // majorant as auxiliary energy; gap = E0 - E(U^n) is the certified defect
    std::string csv = "t,E,mechE,gap,worst_residual,iterations\n";
    for (int n = 0; n <= done; ++n) {
        double t = (static_cast<double>(n) * cfg.tfinal) / static_cast<double>(cfg.tsteps);
        double mech = energy[static_cast<std::size_t>(n)];
        double worst = n == 0 ? 0.0 : certs[static_cast<std::size_t>(n - 1)].r_star;
        long iters = n == 0 ? 0 : certs[static_cast<std::size_t>(n - 1)].iterations;
        csv += format_double(t);
        csv += ',';
        csv += format_double(e0.value);
        csv += ',';
        csv += format_double(mech);
        csv += ',';
        csv += format_double(e0.value - mech);
        csv += ',';
        csv += format_double(worst);
        csv += ',';
        csv += std::to_string(iters);
        csv += '\n';
    }
    write_text_file(outdir / "timeseries.csv", csv);
    man.files["timeseries.csv"] = hash_file(outdir / "timeseries.csv");
    man.energy_final = energy.back();
    man.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    write_manifest(outdir / "manifest.json", man);

    if (failed) return kExitStep;
    std::cout << "run complete: " << done << " steps, energy " << format_double(e0.value) << " -> "
              << format_double(energy.back()) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

namespace detail_cli {

struct StoredRun {
    RunManifest man;
    SystemSpec sys;
    Grid g;
    std::vector<Field> states;
    std::vector<double> energy;
};

/// Load manifest + all snapshots of a completed stride-1 run.
inline StoredRun load_run(const std::filesystem::path& dir) {
    RunManifest man = read_manifest(dir / "manifest.json");
    if (man.status != "complete") throw ConfigError("run is marked incomplete: " + dir.string());
    if (man.stride != 1) throw ConfigError("verification needs stride-1 snapshots");
    CliConfig c;
    c.system = man.system;
    c.a = man.a;
    c.gamma = man.gamma;
    c.mu = man.mu;
    c.grid = man.grid.empty() ? 0 : man.grid[0];
    c.grid_y = man.grid.size() > 1 ? man.grid[1] : 0;
    SystemSpec sys = make_system(c);
    Grid g = make_run_grid(c, sys.dim());
    StoredRun run{std::move(man), std::move(sys), std::move(g), {}, {}};
    for (int n = 0; n <= run.man.tsteps; ++n) {
        Snapshot s = read_snapshot(dir / snapshot_name(n));
        Field f = snapshot_to_field(run.g, s);
        if (f.m != run.sys.components()) throw ConfigError("snapshot component count mismatch");
        EnergyValue e = total_entropy(run.sys.entropy(), run.g, f);
        if (!e.finite) throw ConfigError("stored state has infinite entropy");
        run.states.push_back(std::move(f));
        run.energy.push_back(e.value);
    }
    return run;
}

/// Check every hash recorded in the manifest. Returns the first offender.
inline std::string integrity_failure(const std::filesystem::path& dir, const RunManifest& man) {
    for (const auto& [name, stored] : man.files) {
        std::filesystem::path p = dir / name;
        if (!std::filesystem::is_regular_file(p)) return name + " (missing)";
        if (hash_file(p) != stored) return name;
    }
    return {};
}

}  // namespace detail_cli

inline int cmd_verify(const CliConfig& cfg) {
    if (cfg.positional.empty()) throw ConfigError("verify needs a run directory");
    std::filesystem::path dir(cfg.positional[0]);
    RunManifest man = read_manifest(dir / "manifest.json");
    std::string bad = detail_cli::integrity_failure(dir, man);
    if (!bad.empty()) {
        std::cerr << "integrity failure: " << bad << "\n";
        return kExitIntegrity;
    }
    detail_cli::StoredRun run = detail_cli::load_run(dir);
    const int N = run.man.tsteps;
    const double tau = run.man.tfinal / static_cast<double>(N);
    Dictionary dict = build_dictionary(run.sys, run.man.dict_modes);
    DictionaryTables tables(run.sys, dict, run.g);

    int worst_step = -1;
    double worst_cert = -std::numeric_limits<double>::infinity();
    std::vector<double> slack(static_cast<std::size_t>(N) + 1, 0.0);
    for (int n = 1; n <= N; ++n) {
        StepCertificate cert = tables.certify(run.states[static_cast<std::size_t>(n - 1)],
                                              run.energy[static_cast<std::size_t>(n - 1)],
                                              run.states[static_cast<std::size_t>(n)], tau);
        slack[static_cast<std::size_t>(n)] = std::max(cert.r_star, 0.0);
        if (cert.r_star > worst_cert) {
            worst_cert = cert.r_star;
            worst_step = n;
        }
    }

    PairPath path;
    path.T = run.man.tfinal;
    path.nsteps = N;
    path.tau = tau;
    path.states = std::move(run.states);
    path.energy = run.energy;
    ResidualTables rt = build_residual_tables(run.sys, run.g, tables, path);
    int segments = cfg.windows_set ? cfg.windows : run.man.windows;
    ResidualReport rep = residual_battery(rt, slack, 1.0 + path.energy[0], segments);

    std::string csv = "first,last,member,value,budget\n";
    for (const ResidualEntry& e : rep.entries) {
        csv += std::to_string(e.first);
        csv += ',';
        csv += std::to_string(e.last);
        csv += ',';
        csv += std::to_string(e.member);
        csv += ',';
        csv += format_double(e.value);
        csv += ',';
        csv += format_double(e.budget);
        csv += '\n';
    }
    write_text_file(dir / "report.csv", csv);

    bool cert_ok = worst_cert <= run.man.tol_step;
    bool battery_ok = rep.max_excess <= 0.0;
    if (!cert_ok)
        std::cerr << "certificate violation at step " << worst_step << ": " << format_double(worst_cert)
                  << " > " << format_double(run.man.tol_step) << "\n";
    if (!battery_ok) {
        for (const ResidualEntry& e : rep.entries)
            if (e.value - e.budget == rep.max_excess) {
                std::cerr << "window budget violation: [" << e.first << "," << e.last << "] member "
                          << e.member << " residual " << format_double(e.value) << " > budget "
                          << format_double(e.budget) << "\n";
                break;
            }
    }
    if (cert_ok && battery_ok) {
        std::cout << "verify ok: " << N << " steps, worst certificate " << format_double(worst_cert)
                  << ", battery max excess " << format_double(rep.max_excess) << "\n";
        return kExitOk;
    }
    return kExitBudget;
}

// ---------------------------------------------------------------------------
// check-hypothesis

namespace detail_cli {

/// Deterministic random admissible state for property batteries.
inline Field random_state(const SystemSpec& sys, const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Field f = make_field(g, sys.components());
    if (sys.tag() == SystemTag::compressible) {
        std::uniform_real_distribution<double> uh(0.1, 1.1);
        for (int i = 0; i < g.total(); ++i) {
            f.at(i, 0) = uh(rng);
            for (int c = 1; c < sys.components(); ++c) f.at(i, c) = u(rng);
        }
        return f;
    }
    for (double& x : f.data) x = u(rng);
    sys.project_state(g, f);
    return f;
}

/// Deterministic random admissible test function (mean-free div-free blocks
/// via the dictionary atoms; compressible near-constant density component).
inline TestFunction random_test(const SystemSpec& sys, const DictionaryTables& tables, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    if (sys.tag() != SystemTag::compressible) {
        std::vector<double> c(static_cast<std::size_t>(tables.atom_count()));
        for (double& x : c) x = u(rng);
        return tables.combo(c);
    }
    // keep rho + |phi|^2/2 strictly positive: a small momentum profile and a
    // density component close to one
    std::vector<double> c(static_cast<std::size_t>(tables.atom_count()));
    double scale = 0.4 / static_cast<double>(c.size());
    for (double& x : c) x = scale * u(rng);
    TestFunction phi = tables.combo(c);
    const std::size_t nb = phi.coef[0].size();
    phi.coef[0][0] = 1.0;
    for (std::size_t b = 1; b < nb; ++b) phi.coef[0][b] = 0.2 / static_cast<double>(nb) * u(rng);
    return phi;
}

inline double sup_gradient_norm(const Grid& g, const TestEval& ev) {
    double sup = 0.0;
    for (int i = 0; i < g.total(); ++i) {
        double s = 0.0;
        for (int c = 0; c < ev.gradient.m; ++c) s += ev.gradient.at(i, c) * ev.gradient.at(i, c);
        sup = std::max(sup, std::sqrt(s));
    }
    return sup;
}

struct Battery {
    std::string name;
    bool pass = true;
    double worst = 0.0;
    std::string note;
};

}  // namespace detail_cli

inline int cmd_check_hypothesis(const CliConfig& cfg) {
    SystemSpec sys = make_system(cfg);
    const int d = sys.dim();
    Grid g = make_grid(d, d == 1 ? 256 : 64, d == 2 ? 64 : 0);
    Dictionary dict = build_dictionary(sys, cfg.dict_modes);
    DictionaryTables tables(sys, dict, g);
    std::mt19937_64 rng(0x51ed2701u + static_cast<std::uint64_t>(sys.tag()));
    std::uniform_real_distribution<double> u3(-3.0, 3.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const EntropyPair& pair = sys.entropy();
    const int m = sys.components();
    std::vector<detail_cli::Battery> report;

    {
        detail_cli::Battery b{"fenchel-gap"};
        const int count = std::max(100, cfg.samples);
        std::vector<double> y(static_cast<std::size_t>(m)), z(static_cast<std::size_t>(m));
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < count; ++k) {
            for (int c = 0; c < m; ++c) z[static_cast<std::size_t>(c)] = u3(rng);
            if (sys.tag() == SystemTag::compressible) {
                y[0] = 0.05 + 2.95 * u01(rng);
                for (int c = 1; c < m; ++c) y[static_cast<std::size_t>(c)] = u3(rng);
            } else {
                for (int c = 0; c < m; ++c) y[static_cast<std::size_t>(c)] = u3(rng);
            }
            double gap = fenchel_gap(pair, y, z);
            if (std::isfinite(gap)) worst = std::min(worst, gap);
        }
        b.worst = worst;
        b.pass = worst >= -1e-10;
        b.note = "min gap " + format_double(worst);
        report.push_back(b);
    }

    {
        detail_cli::Battery b{"entropy-flux-identity"};
        const int count = std::max(5, cfg.samples / 200);
        double worst = 0.0;
        for (int k = 0; k < count; ++k) {
            TestFunction phi = detail_cli::random_test(sys, tables, rng);
            FluxIdentityReport rep = sys.entropy_flux_identity(g, phi);
            TestEval ev = eval_test(phi, g);
            Field state = dual_to_state(pair, g, phi);
            EnergyValue e = total_entropy(pair, g, state);
            if (!e.finite) throw ContractError("probe state has infinite entropy");
            double scale =
                1.0 + sys.flux_bound_constant() * (1.0 + e.value) * detail_cli::sup_gradient_norm(g, ev);
            worst = std::max(worst, std::abs(rep.value) / scale);
        }
        b.worst = worst;
        b.pass = worst <= 1e-8;
        b.note = "max |identity|/scale " + format_double(worst);
        report.push_back(b);
    }

    {
        detail_cli::Battery b{"convexity"};
        const int count = std::max(10, cfg.samples / 100);
        double worst_slack = -kInf, worst_neg = -kInf;
        for (int k = 0; k < count; ++k) {
            Field U1 = detail_cli::random_state(sys, g, rng);
            Field U2 = detail_cli::random_state(sys, g, rng);
            TestFunction phi = detail_cli::random_test(sys, tables, rng);
            double lambda = u01(rng);
            ConvexityReport cr = sys.convexity_probe(g, phi, U1, U2, lambda);
            double j1 = sys.flux_pairing(g, U1, phi) + sys.reg_weight(g, phi) * total_entropy(pair, g, U1).value;
            double j2 = sys.flux_pairing(g, U2, phi) + sys.reg_weight(g, phi) * total_entropy(pair, g, U2).value;
            double scale = 1.0 + std::abs(j1) + std::abs(j2);
            worst_slack = std::max(worst_slack, cr.slack / scale);
            worst_neg = std::max(worst_neg, -cr.j_mid / scale);
        }
        b.worst = std::max(worst_slack, worst_neg);
        b.pass = worst_slack <= 1e-10 && worst_neg <= 1e-10;
        b.note = "max slack " + format_double(worst_slack) + ", max negativity " + format_double(worst_neg);
        report.push_back(b);
    }

    {
        detail_cli::Battery b{"k-homogeneity"};
        const int count = 20;
        double worst = 0.0;
        for (int k = 0; k < count; ++k) {
            TestFunction phi = detail_cli::random_test(sys, tables, rng);
            double base = sys.reg_weight(g, phi);
            for (double alpha : {0.5, 2.0, 10.0}) {
                double scaled = sys.reg_weight(g, phi.scaled(alpha));
                worst = std::max(worst, std::abs(scaled - alpha * base) / (1.0 + alpha * base));
            }
        }
        b.worst = worst;
        b.pass = worst <= 1e-12;
        b.note = "max homogeneity defect " + format_double(worst);
        report.push_back(b);
    }

    {
        detail_cli::Battery b{"flux-bound"};
        const int count = std::max(10, cfg.samples / 100);
        double worst = -kInf;
        for (int k = 0; k < count; ++k) {
            Field U = detail_cli::random_state(sys, g, rng);
            TestFunction phi = detail_cli::random_test(sys, tables, rng);
            TestEval ev = eval_test(phi, g);
            EnergyValue e = total_entropy(pair, g, U);
            if (!e.finite) throw ContractError("probe state has infinite entropy");
            double bound = sys.flux_bound_constant() * (1.0 + e.value) * detail_cli::sup_gradient_norm(g, ev);
            double val = std::abs(sys.flux_pairing(g, U, phi));
            worst = std::max(worst, (val - bound) / (1.0 + bound));
        }
        b.worst = worst;
        b.pass = worst <= 1e-12;
        b.note = "max bound excess " + format_double(worst);
        report.push_back(b);
    }

    bool all = true;
    for (const auto& b : report) {
        std::cout << (b.pass ? "PASS " : "FAIL ") << b.name << ": " << b.note << "\n";
        all = all && b.pass;
    }
    if (!all) {
        for (const auto& b : report)
            if (!b.pass) std::cerr << "hypothesis battery failed: " << b.name << "\n";
        return 1;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const CliConfig& cfg) {
    if (cfg.positional.empty()) throw ConfigError("compare needs at least one run directory");
    std::vector<RunManifest> mans;
    for (const std::string& dir : cfg.positional) mans.push_back(read_manifest(std::filesystem::path(dir) / "manifest.json"));
    for (const RunManifest& man : mans)
        if (man.system != mans[0].system) throw ConfigError("compare needs runs of one system");

    const std::string& system = mans[0].system;
    if (system == "euler") {
        std::filesystem::path dir(cfg.positional[0]);
        detail_cli::StoredRun run = detail_cli::load_run(dir);
        const int N = run.man.tsteps;
        const double T = run.man.tfinal;
        // reference solve: dealiased spectral vorticity dynamics, step count a
        // CFL-safe multiple of N
        double vmax = 0.0;
        for (int i = 0; i < run.g.total(); ++i)
            vmax = std::max(vmax, std::hypot(run.states[0].at(i, 0), run.states[0].at(i, 1)));
        int nmax = std::max(run.g.nx(), run.g.ny());
        int mult = std::max(1, static_cast<int>(std::ceil(vmax * T * static_cast<double>(nmax) /
                                                          (0.4 * static_cast<double>(N)))));
        OracleTrajectory oracle = classical_euler2d(run.g, run.states[0], T, mult * N, N);
        double drift = std::abs(0.5 * inner(run.g, oracle.states.back(), oracle.states.back()) -
                                0.5 * inner(run.g, oracle.states.front(), oracle.states.front()));
        if (drift > 1e-8 * (1.0 + run.energy[0]))
            throw ConfigError("reference solve drifted beyond tolerance; refine steps");

        Trajectory traj;
        traj.sys = run.sys.tag();
        traj.T = T;
        traj.nsteps = N;
        traj.states = run.states;
        traj.energy = run.energy;
        const double tau = T / static_cast<double>(N);
        Dictionary dict = build_dictionary(run.sys, run.man.dict_modes);
        DictionaryTables tables(run.sys, dict, run.g);
        for (int n = 1; n <= N; ++n)
            traj.certs.push_back(tables.certify(run.states[static_cast<std::size_t>(n - 1)],
                                                run.energy[static_cast<std::size_t>(n - 1)],
                                                run.states[static_cast<std::size_t>(n)], tau));
        RelativeEntropyTrace tr = weak_strong_report(run.sys, run.g, traj, oracle);
        std::string csv = "t,R,W,gap,bound\n";
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            csv += format_double(tr.times[i]);
            csv += ',';
            csv += format_double(tr.R[i]);
            csv += ',';
            csv += format_double(tr.W[i]);
            csv += ',';
            csv += format_double(tr.gap[i]);
            csv += ',';
            csv += format_double(tr.bound[i]);
            csv += '\n';
        }
        write_text_file(dir / "weak_strong.csv", csv);
        std::cout << "weak-strong check: Ktilde " << format_double(tr.ktilde) << ", bound "
                  << (tr.bound_satisfied ? "satisfied" : "violated") << "\n";
        return tr.bound_satisfied ? kExitOk : kExitBudget;
    }

    if (system == "burgers") {
        detail_cli::InitSpec init = detail_cli::parse_init(mans[0].init);
        if (init.name != "sine") {
            std::cerr << "no reference solution for initial data: " << mans[0].init << "\n";
            return kExitNoOracle;
        }
        double amp = detail_cli::kv_double(init, "amp", 1.0);
        std::string csv = "tsteps,grid,l1_error\n";
        std::vector<double> taus, errs;
        for (std::size_t r = 0; r < mans.size(); ++r) {
            const RunManifest& man = mans[r];
            detail_cli::InitSpec ri = detail_cli::parse_init(man.init);
            if (ri.name != "sine" || detail_cli::kv_double(ri, "amp", 1.0) != amp)
                throw ConfigError("compare needs runs with matching initial data");
            std::filesystem::path dir(cfg.positional[r]);
            Snapshot s = read_snapshot(dir / detail_cli::snapshot_name(man.tsteps));
            Grid g = make_grid(1, man.grid[0]);
            Field last = snapshot_to_field(g, s);
            StableSum l1;
            for (int i = 0; i < g.nx(); ++i)
                l1.add(std::abs(last.at(i, 0) - burgers_exact(amp, man.tfinal, g.coord(0, i))));
            double err = l1.value() / static_cast<double>(g.nx());
            csv += std::to_string(man.tsteps);
            csv += ',';
            csv += std::to_string(man.grid[0]);
            csv += ',';
            csv += format_double(err);
            csv += '\n';
            taus.push_back(man.tfinal / static_cast<double>(man.tsteps));
            errs.push_back(err);
            std::cout << "tsteps " << man.tsteps << ": L1 error " << format_double(err) << "\n";
        }
        write_text_file(std::filesystem::path(cfg.positional[0]) / "oracle_error.csv", csv);
        if (mans.size() >= 2) {
            // least-squares slope of log(error) against log(tau)
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < taus.size(); ++i) {
                double x = std::log(taus[i]), y = std::log(std::max(errs[i], 1e-300));
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            double nval = static_cast<double>(taus.size());
            double order = (nval * sxy - sx * sy) / (nval * sxx - sx * sx);
            std::cout << "fitted order " << format_double(order) << "\n";
        }
        return kExitOk;
    }

    std::cerr << "no reference solution for system: " << system << "\n";
    return kExitNoOracle;
}

// ---------------------------------------------------------------------------
// dispatch

inline int cli_main(const std::vector<std::string>& args) {
    if (args.empty()) {
        std::cerr << "usage: evs <run|verify|check-hypothesis|compare> [config file] [--flags]\n";
        return kExitConfig;
    }
    const std::string& command = args[0];
    std::vector<std::string> rest(args.begin() + 1, args.end());
    try {
        CliConfig cfg = parse_cli(rest);
        if (command == "run") return cmd_run(cfg);
        if (command == "verify") return cmd_verify(cfg);
        if (command == "check-hypothesis") return cmd_check_hypothesis(cfg);
        if (command == "compare") return cmd_compare(cfg);
        std::cerr << "unknown command: " << command << "\n";
        return kExitConfig;
    } catch (const StepError& ex) {
        std::cerr << "step failure: " << ex.what() << "\n";
        return kExitStep;
    } catch (const ConfigError& ex) {
        std::cerr << "configuration error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const ContractError& ex) {
        std::cerr << "contract violation: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& ex) {
        std::cerr << "domain error: " << ex.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace evs
