#pragma once

// Persistence: binary field snapshots (fixed little-endian layout), content
// hashing, shortest round-trip CSV numbers, and the JSON run manifest.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evs/errors.hpp"
#include "evs/grid.hpp"

namespace evs {

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit)

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<std::uint64_t>(data[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::string hash_file(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

// ---------------------------------------------------------------------------
// Number formatting: shortest decimal that round-trips to the same f64.

inline std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("cannot parse number: " + s);
    return v;
}

// ---------------------------------------------------------------------------
// Snapshot format: magic "EVS1", then little-endian u32 version, d, m, n[d],
// then the node-major payload as little-endian f64.

namespace detail_io {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t& pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
}

inline double get_f64(const std::vector<unsigned char>& b, std::size_t& pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

}  // namespace detail_io

struct Snapshot {
    int d = 0;
    int m = 0;
    std::array<int, 2> n = {0, 0};
    std::vector<double> data;  // node-major, then component
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline void write_snapshot(const std::filesystem::path& path, const Grid& g, const Field& f) {
    require_matches(g, f);
    std::string out;
    out.reserve(16 + f.data.size() * 8);
    out += "EVS1";
    detail_io::put_u32(out, 1u);
    detail_io::put_u32(out, static_cast<std::uint32_t>(g.dim()));
    detail_io::put_u32(out, static_cast<std::uint32_t>(f.m));
    for (int ax = 0; ax < g.dim(); ++ax) detail_io::put_u32(out, static_cast<std::uint32_t>(g.extent(ax)));
    for (double x : f.data) detail_io::put_f64(out, x);
    write_text_file(path, out);
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    std::vector<unsigned char> b = read_file_bytes(path);
    if (b.size() < 16 || b[0] != 'E' || b[1] != 'V' || b[2] != 'S' || b[3] != '1')
        throw ConfigError("not a field snapshot: " + path.string());
    std::size_t pos = 4;
    std::uint32_t version = detail_io::get_u32(b, pos);
    if (version != 1u) throw ConfigError("unsupported snapshot version");
    Snapshot s;
    s.d = static_cast<int>(detail_io::get_u32(b, pos));
    if (s.d < 1 || s.d > 2) throw ConfigError("snapshot dimension out of range");
    s.m = static_cast<int>(detail_io::get_u32(b, pos));
    if (s.m < 1 || s.m > 16) throw ConfigError("snapshot component count out of range");
    std::size_t total = 1;
    for (int ax = 0; ax < s.d; ++ax) {
        s.n[static_cast<std::size_t>(ax)] = static_cast<int>(detail_io::get_u32(b, pos));
        if (s.n[static_cast<std::size_t>(ax)] < 1) throw ConfigError("snapshot extent out of range");
        total *= static_cast<std::size_t>(s.n[static_cast<std::size_t>(ax)]);
    }
    std::size_t count = total * static_cast<std::size_t>(s.m);
    if (b.size() != pos + count * 8) throw ConfigError("snapshot payload length mismatch");
    s.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) s.data[i] = detail_io::get_f64(b, pos);
    return s;
}

/// Load a snapshot into a field on a matching grid.
inline Field snapshot_to_field(const Grid& g, const Snapshot& s) {
    if (s.d != g.dim() || s.n[0] != g.nx() || (s.d == 2 && s.n[1] != g.ny()))
        throw ConfigError("snapshot grid does not match the configured grid");
    Field f = make_field(g, s.m);
    f.data = s.data;
    return f;
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    std::string tool = "evs 1.0.0";
    std::string system;
    double a = 1.0;
    double gamma = 1.4;
    double mu = 1.0;
    std::vector<int> grid;  // extents per axis
    double tfinal = 0.0;
    int tsteps = 0;
    int dict_modes = 2;
    double tol = 1e-8;       // relative certificate tolerance
    double tol_step = 0.0;   // resolved absolute tolerance
    std::string init;
    int stride = 1;
    int windows = 16;
    double energy_initial = 0.0;
    double energy_final = 0.0;
    std::string status = "complete";
    int failed_step = -1;
    std::map<std::string, std::string> files;  // artifact name -> fnv1a-64 hex
    std::string wall_clock_utc;
    double elapsed_seconds = 0.0;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = m.tool;
    j["system"] = m.system;
    j["a"] = m.a;
    j["gamma"] = m.gamma;
    j["mu"] = m.mu;
    j["grid"] = m.grid;
    j["tfinal"] = m.tfinal;
    j["tsteps"] = m.tsteps;
    j["dict_modes"] = m.dict_modes;
    j["tol"] = m.tol;
    j["tol_step"] = m.tol_step;
    j["init"] = m.init;
    j["stride"] = m.stride;
    j["windows"] = m.windows;
    j["energy_initial"] = m.energy_initial;
    j["energy_final"] = m.energy_final;
    j["status"] = m.status;
    j["failed_step"] = m.failed_step;
    j["files"] = m.files;
    j["wall_clock_utc"] = m.wall_clock_utc;
    j["elapsed_seconds"] = m.elapsed_seconds;
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.tool = j.at("tool").get<std::string>();
        m.system = j.at("system").get<std::string>();
        m.a = j.at("a").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.mu = j.at("mu").get<double>();
        m.grid = j.at("grid").get<std::vector<int>>();
        m.tfinal = j.at("tfinal").get<double>();
        m.tsteps = j.at("tsteps").get<int>();
        m.dict_modes = j.at("dict_modes").get<int>();
        m.tol = j.at("tol").get<double>();
        m.tol_step = j.at("tol_step").get<double>();
        m.init = j.at("init").get<std::string>();
        m.stride = j.at("stride").get<int>();
        m.windows = j.at("windows").get<int>();
        m.energy_initial = j.at("energy_initial").get<double>();
        m.energy_final = j.at("energy_final").get<double>();
        m.status = j.at("status").get<std::string>();
        m.failed_step = j.at("failed_step").get<int>();
        m.files = j.at("files").get<std::map<std::string, std::string>>();
        m.wall_clock_utc = j.at("wall_clock_utc").get<std::string>();
        m.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest field error: ") + e.what());
    }
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path);
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw ConfigError("manifest is not valid JSON: " + path.string());
    return manifest_from_json(j);
}

}  // namespace evs
