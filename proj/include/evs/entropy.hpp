#pragma once

// Entropy pair machinery shared by all systems: eta, its convex conjugate,
// the conjugate gradient map, Fenchel-gap evaluation, total entropy
// quadrature, and monotone energy rescaling.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "evs/errors.hpp"
#include "evs/grid.hpp"
#include "evs/summation.hpp"
#include "evs/testfunction.hpp"

namespace evs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct EnergyValue {
    double value = 0.0;
    bool finite = true;
};

/// Entropy pair for one system. Quadratic for Burgers/Euler/MHD; the
/// compressible pair carries the gamma-law potential P(h) = a h^gamma/(gamma-1)
/// with pressure p(h) = a h^gamma, Q = P', and closed-form Q^{-1}.
class EntropyPair {
  public:
    EntropyPair(SystemTag sys, int d, double a = 1.0, double gamma = 1.4, double mu = 1.0)
        : sys_(sys), d_(d), a_(a), gamma_(gamma), mu_(mu) {
        if (sys == SystemTag::compressible && (gamma <= 1.0 || a <= 0.0))
            throw ConfigError("gamma-law entropy needs gamma > 1 and a > 0");
        if (sys == SystemTag::mhd && mu <= 0.0) throw ConfigError("magnetic permeability must be positive");
    }

    SystemTag sys() const { return sys_; }
    int dim() const { return d_; }
    int components() const { return state_components(sys_, d_); }
    double a() const { return a_; }
    double gamma() const { return gamma_; }
    double mu() const { return mu_; }

    double potential(double h) const { return a_ * std::pow(h, gamma_) / (gamma_ - 1.0); }
    double pressure(double h) const { return a_ * std::pow(h, gamma_); }
    double pressure_slope(double h) const { return a_ * gamma_ * std::pow(h, gamma_ - 1.0); }
    double potential_slope(double h) const { return a_ * gamma_ * std::pow(h, gamma_ - 1.0) / (gamma_ - 1.0); }
    /// Inverse of Q = P' in closed form for the gamma law.
    double potential_slope_inverse(double w) const {
        if (w <= 0.0) return 0.0;
        return std::pow((gamma_ - 1.0) * w / (a_ * gamma_), 1.0 / (gamma_ - 1.0));
    }

    /// Quadratic weight of a state component (valid for the quadratic
    /// systems; the compressible entropy is not quadratic).
    double quad_weight(int c) const {
        if (sys_ == SystemTag::mhd) return c < d_ ? 1.0 : mu_;
        if (sys_ == SystemTag::compressible) throw ContractError("compressible entropy is not quadratic");
        (void)c;
        return 1.0;
    }

    bool quadratic() const { return sys_ != SystemTag::compressible; }

  private:
    SystemTag sys_;
    int d_;
    double a_, gamma_, mu_;
};

/// Pointwise entropy eta(y); +infinity is a value, not an error.
inline double eta(const EntropyPair& pair, std::span<const double> y) {
    const int m = pair.components();
    if (static_cast<int>(y.size()) != m) throw ContractError("state arity mismatch");
    for (double v : y)
        if (!std::isfinite(v)) throw DomainError("non-finite state sample");
    switch (pair.sys()) {
        case SystemTag::burgers:
            return 0.5 * y[0] * y[0];
        case SystemTag::euler: {
            double s = 0.0;
            for (int c = 0; c < m; ++c) s += y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
            return 0.5 * s;
        }
        case SystemTag::mhd: {
            double sv = 0.0, sh = 0.0;
            for (int c = 0; c < pair.dim(); ++c) {
                sv += y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
                sh += y[static_cast<std::size_t>(pair.dim() + c)] * y[static_cast<std::size_t>(pair.dim() + c)];
            }
            return 0.5 * sv + 0.5 * pair.mu() * sh;
        }
        case SystemTag::compressible: {
            double h = y[0];
            double m2 = 0.0;
            for (int c = 1; c < m; ++c) m2 += y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
            if (h > 0.0) return 0.5 * m2 / h + pair.potential(h);
            if (h == 0.0 && m2 == 0.0) return 0.0;
            return kInf;
        }
    }
    throw ContractError("unknown system tag");
}

/// Convex conjugate eta*(z); finite everywhere.
inline double eta_star(const EntropyPair& pair, std::span<const double> z) {
    const int m = pair.components();
    if (static_cast<int>(z.size()) != m) throw ContractError("dual arity mismatch");
    for (double v : z)
        if (!std::isfinite(v)) throw DomainError("non-finite dual sample");
    switch (pair.sys()) {
        case SystemTag::burgers:
            return 0.5 * z[0] * z[0];
        case SystemTag::euler: {
            double s = 0.0;
            for (int c = 0; c < m; ++c) s += z[static_cast<std::size_t>(c)] * z[static_cast<std::size_t>(c)];
            return 0.5 * s;
        }
        case SystemTag::mhd: {
            double sp = 0.0, sq = 0.0;
            for (int c = 0; c < pair.dim(); ++c) {
                sp += z[static_cast<std::size_t>(c)] * z[static_cast<std::size_t>(c)];
                sq += z[static_cast<std::size_t>(pair.dim() + c)] * z[static_cast<std::size_t>(pair.dim() + c)];
            }
            return 0.5 * sp + 0.5 * sq / pair.mu();
        }
        case SystemTag::compressible: {
            double phi2 = 0.0;
            for (int c = 1; c < m; ++c) phi2 += z[static_cast<std::size_t>(c)] * z[static_cast<std::size_t>(c)];
            double w = z[0] + 0.5 * phi2;
            if (w <= 0.0) return 0.0;
            return pair.pressure(pair.potential_slope_inverse(w));
        }
    }
    throw ContractError("unknown system tag");
}

/// Gradient of eta*: the dual-to-primal map.
inline std::vector<double> d_eta_star(const EntropyPair& pair, std::span<const double> z) {
    const int m = pair.components();
    if (static_cast<int>(z.size()) != m) throw ContractError("dual arity mismatch");
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    switch (pair.sys()) {
        case SystemTag::burgers:
        case SystemTag::euler:
            for (int c = 0; c < m; ++c) out[static_cast<std::size_t>(c)] = z[static_cast<std::size_t>(c)];
            return out;
        case SystemTag::mhd:
            for (int c = 0; c < pair.dim(); ++c) {
                out[static_cast<std::size_t>(c)] = z[static_cast<std::size_t>(c)];
                out[static_cast<std::size_t>(pair.dim() + c)] = z[static_cast<std::size_t>(pair.dim() + c)] / pair.mu();
            }
            return out;
        case SystemTag::compressible: {
            double phi2 = 0.0;
            for (int c = 1; c < m; ++c) phi2 += z[static_cast<std::size_t>(c)] * z[static_cast<std::size_t>(c)];
            double w = z[0] + 0.5 * phi2;
            double h = w > 0.0 ? pair.potential_slope_inverse(w) : 0.0;
            out[0] = h;
            for (int c = 1; c < m; ++c) out[static_cast<std::size_t>(c)] = h * z[static_cast<std::size_t>(c)];
            return out;
        }
    }
    throw ContractError("unknown system tag");
}

/// eta(y) + eta*(z) - z.y; analytically >= 0, +infinity when y is outside
/// dom eta.
inline double fenchel_gap(const EntropyPair& pair, std::span<const double> y, std::span<const double> z) {
    double ey = eta(pair, y);
    if (!std::isfinite(ey)) return kInf;
    double ez = eta_star(pair, z);
    double dot = 0.0;
    for (std::size_t c = 0; c < y.size(); ++c) dot += y[c] * z[c];
    return ey + ez - dot;
}

/// Total entropy E(U) = integral of eta over the torus; infinite iff some
/// node leaves dom eta.
inline EnergyValue total_entropy(const EntropyPair& pair, const Grid& g, const Field& U) {
    require_matches(g, U);
    if (U.m != pair.components()) throw ContractError("state arity mismatch");
    StableSum s;
    const int total = g.total(), m = U.m;
    for (int i = 0; i < total; ++i) {
        double e = eta(pair, std::span<const double>(U.data.data() + static_cast<std::ptrdiff_t>(i) * m,
                                                     static_cast<std::size_t>(m)));
        if (!std::isfinite(e)) return {kInf, false};
        s.add(e);
    }
    return {s.value() / static_cast<double>(total), true};
}

/// Pointwise derivative of eta inside dom eta (used by weak-strong
/// diagnostics and descent directions).
inline std::vector<double> d_eta(const EntropyPair& pair, std::span<const double> y) {
    const int m = pair.components();
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    switch (pair.sys()) {
        case SystemTag::burgers:
        case SystemTag::euler:
            for (int c = 0; c < m; ++c) out[static_cast<std::size_t>(c)] = y[static_cast<std::size_t>(c)];
            return out;
        case SystemTag::mhd:
            for (int c = 0; c < pair.dim(); ++c) {
                out[static_cast<std::size_t>(c)] = y[static_cast<std::size_t>(c)];
                out[static_cast<std::size_t>(pair.dim() + c)] = pair.mu() * y[static_cast<std::size_t>(pair.dim() + c)];
            }
            return out;
        case SystemTag::compressible: {
            double h = y[0];
            if (h <= 0.0) throw DomainError("entropy gradient needs positive density");
            double m2 = 0.0;
            for (int c = 1; c < m; ++c) m2 += y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
            out[0] = -0.5 * m2 / (h * h) + pair.potential_slope(h);
            for (int c = 1; c < m; ++c) out[static_cast<std::size_t>(c)] = y[static_cast<std::size_t>(c)] / h;
            return out;
        }
    }
    throw ContractError("unknown system tag");
}

/// Nodal image of a test function under the dual-to-primal map.
inline Field dual_to_state(const EntropyPair& pair, const Grid& g, const TestFunction& phi) {
    TestEval ev = eval_test(phi, g);
    const int m = pair.components();
    if (ev.values.m != m) throw ContractError("test function arity mismatch");
    Field U = make_field(g, m);
    std::vector<double> z(static_cast<std::size_t>(m));
    for (int i = 0; i < g.total(); ++i) {
        for (int c = 0; c < m; ++c) z[static_cast<std::size_t>(c)] = ev.values.at(i, c);
        auto y = d_eta_star(pair, z);
        for (int c = 0; c < m; ++c) U.at(i, c) = y[static_cast<std::size_t>(c)];
    }
    return U;
}

/// Monotone bisection for alpha in [0,1] with E(d_eta_star(alpha Phi))
/// matching the target energy within 1e-10*(1+target).
inline double energy_scale(const EntropyPair& pair, const Grid& g, const TestFunction& phi, double target) {
    auto G = [&](double alpha) {
        EnergyValue e = total_entropy(pair, g, dual_to_state(pair, g, phi.scaled(alpha)));
        if (!e.finite) throw ContractError("energy rescale left the entropy domain");
        return e.value;
    };
    double g1 = G(1.0);
    if (target < 0.0 || target > g1 * (1.0 + 1e-12) + 1e-300) throw ContractError("energy target out of range");
    double tol = 1e-10 * (1.0 + target);
    if (target <= tol) return 0.0;
    if (std::abs(g1 - target) <= tol) return 1.0;
    double lo = 0.0, hi = 1.0;
    double alpha = 0.5;
    for (int it = 0; it < 200; ++it) {
        alpha = 0.5 * (lo + hi);
        double v = G(alpha);
        if (std::abs(v - target) <= tol) return alpha;
        (v < target ? lo : hi) = alpha;
    }
    return alpha;
}

}  // namespace evs
