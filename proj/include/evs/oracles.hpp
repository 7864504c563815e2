#pragma once

// Reference solutions used to judge the variational scheme: a dealiased
// pseudo-spectral vorticity solver for smooth incompressible 2D flow, and
// the exact entropy solution for the sine-wave scalar conservation law
// (characteristics before the gradient blow-up, symmetric stationary shock
// after it), plus a fine-grid finite-volume cross-check.

#include <cmath>
#include <vector>

#include "evs/errors.hpp"
#include "evs/grid.hpp"
#include "evs/summation.hpp"

namespace evs {

struct OracleTrajectory {
    double T = 0.0;
    int steps = 0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Field> states;  // sampled velocity fields (m = 2)

    /// State at time t: exact sample match required (within 1e-12).
    const Field& sample(double t) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) <= 1e-12 * (1.0 + std::abs(t))) return states[i];
        throw ContractError("requested time is not an oracle sample point");
    }
};

namespace detail_oracle {

/// Velocity from vorticity modes: v = perp-grad of the stream function,
/// laplacian(psi) = omega.
inline void velocity_from_vorticity(const Grid& g, const Modes& wh, Modes& vx, Modes& vy) {
    const int nx = g.nx(), ny = g.ny();
    vx.assign(wh.size(), {0.0, 0.0});
    vy.assign(wh.size(), {0.0, 0.0});
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            int kx = g.wavenumber(0, ix), ky = g.wavenumber(1, iy);
            if ((kx == 0 && ky == 0) || g.is_nyquist(0, ix) || g.is_nyquist(1, iy)) continue;
            std::size_t idx = static_cast<std::size_t>(ix + nx * iy);
            double k2 = kTwoPi * kTwoPi * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
            std::complex<double> psi = -wh[idx] / k2;
            // v = (-d_y psi, d_x psi)
            vx[idx] = std::complex<double>(kTwoPi * ky * psi.imag(), -kTwoPi * ky * psi.real());
            vy[idx] = std::complex<double>(-kTwoPi * kx * psi.imag(), kTwoPi * kx * psi.real());
        }
}

inline Field modes_pair_to_field(const Grid& g, const Modes& vx, const Modes& vy) {
    Field v = make_field(g, 2);
    Modes tmp = vx;
    from_modes(g, std::move(tmp), v, 0);
    tmp = vy;
    from_modes(g, std::move(tmp), v, 1);
    return v;
}

/// Dealiased advection term -(v . grad omega) in mode space.
inline Modes vorticity_rhs(const Grid& g, const Modes& wh, int dealias_cutoff) {
    Modes vx, vy;
    velocity_from_vorticity(g, wh, vx, vy);
    Modes wx = wh, wy = wh;
    derivative_modes(g, wx, 0);
    derivative_modes(g, wy, 1);
    Field fv = modes_pair_to_field(g, vx, vy);
    Field fw = modes_pair_to_field(g, wx, wy);
    Field prod = make_field(g, 1);
    for (int i = 0; i < g.total(); ++i) prod.at(i, 0) = fv.at(i, 0) * fw.at(i, 0) + fv.at(i, 1) * fw.at(i, 1);
    Modes rhs = to_modes(g, prod, 0);
    band_filter_modes(g, rhs, dealias_cutoff);
    for (auto& z : rhs) z = -z;
    return rhs;
}

}  // namespace detail_oracle

/// Smooth incompressible 2D reference flow: vorticity-form pseudo-spectral
/// RK4 with 2/3-rule dealiasing. Galerkin truncation conserves kinetic
/// energy exactly in the semi-discrete limit, so drift measures pure time
/// error. Requires a mean-free, band-limited start and a CFL-safe step.
inline OracleTrajectory classical_euler2d(const Grid& g, const Field& v0, double T, int steps, int samples = 0) {
    if (g.dim() != 2 || v0.m != 2) throw ContractError("reference flow needs a 2D velocity field");
    require_matches(g, v0);
    if (steps < 1 || T <= 0.0) throw ConfigError("reference flow needs steps >= 1 and T > 0");
    if (samples <= 0) samples = steps;
    if (steps % samples != 0) throw ConfigError("sample count must divide the step count");
    double vmax = 0.0;
    for (int i = 0; i < g.total(); ++i) vmax = std::max(vmax, std::hypot(v0.at(i, 0), v0.at(i, 1)));
    double dt = T / static_cast<double>(steps);
    if (vmax * dt * static_cast<double>(std::max(g.nx(), g.ny())) > 0.5)
        throw ConfigError("time step violates the advective CFL bound");
    double mx = std::abs(mean_component(g, v0, 0)), my = std::abs(mean_component(g, v0, 1));
    if (mx > 1e-12 || my > 1e-12) throw ContractError("reference flow requires a mean-free velocity");

    const int cutoff = std::min(g.nx(), g.ny()) / 3;
    // vorticity of the initial field
    Modes v0x = to_modes(g, v0, 0), v0y = to_modes(g, v0, 1);
    Modes wh(v0x.size());
    {
        Modes dvy = v0y, dvx = v0x;
        derivative_modes(g, dvy, 0);
        derivative_modes(g, dvx, 1);
        for (std::size_t i = 0; i < wh.size(); ++i) wh[i] = dvy[i] - dvx[i];
        band_filter_modes(g, wh, cutoff);
    }

    OracleTrajectory traj;
    traj.T = T;
    traj.steps = steps;
    traj.dt = dt;
    const int stride = steps / samples;
    auto push_sample = [&](int n) {
        Modes vx, vy;
        detail_oracle::velocity_from_vorticity(g, wh, vx, vy);
        traj.states.push_back(detail_oracle::modes_pair_to_field(g, vx, vy));
        traj.times.push_back(static_cast<double>(n) * T / static_cast<double>(steps));
    };
    push_sample(0);
    Modes k1, k2, k3, k4, tmp(wh.size());
    for (int n = 1; n <= steps; ++n) {
        k1 = detail_oracle::vorticity_rhs(g, wh, cutoff);
        for (std::size_t i = 0; i < wh.size(); ++i) tmp[i] = wh[i] + 0.5 * dt * k1[i];
        k2 = detail_oracle::vorticity_rhs(g, tmp, cutoff);
        for (std::size_t i = 0; i < wh.size(); ++i) tmp[i] = wh[i] + 0.5 * dt * k2[i];
        k3 = detail_oracle::vorticity_rhs(g, tmp, cutoff);
        for (std::size_t i = 0; i < wh.size(); ++i) tmp[i] = wh[i] + dt * k3[i];
        k4 = detail_oracle::vorticity_rhs(g, tmp, cutoff);
        for (std::size_t i = 0; i < wh.size(); ++i)
            wh[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (n % stride == 0) push_sample(n);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Exact scalar conservation-law solution for u0 = A sin(2 pi x)

/// Gradient blow-up time of the sine profile: 1/(2 pi A).
inline double burgers_shock_time(double A) {
    if (A <= 0.0) throw ConfigError("sine amplitude must be positive");
    return 1.0 / (kTwoPi * A);
}

namespace detail_oracle {

/// Characteristic root: solve xi + t A sin(2 pi xi) = x by Newton with a
/// bisection fallback on a bracket where the map is monotone.
inline double char_root(double A, double t, double x, double lo, double hi) {
    auto gfun = [&](double xi) { return xi + t * A * std::sin(kTwoPi * xi) - x; };
    double xi = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        double f = gfun(xi);
        if (std::abs(f) <= 1e-12) return xi;
        double fp = 1.0 + t * A * kTwoPi * std::cos(kTwoPi * xi);
        if (fp > 1e-14) {
            double next = xi - f / fp;
            if (next > lo && next < hi) {
                xi = next;
                continue;
            }
        }
        (f > 0.0 ? hi : lo) = xi;
        xi = 0.5 * (lo + hi);
    }
    return xi;
}

}  // namespace detail_oracle

/// Entropy solution of u_t + (u^2/2)_x = 0 with u(0, x) = A sin(2 pi x).
/// Characteristics before the blow-up time; after it, the single stationary
/// shock sits at x = 1/2 by odd symmetry and each side stays on its own
/// characteristic branch.
inline double burgers_exact(double A, double t, double x) {
    if (t < 0.0) throw ContractError("negative time");
    x -= std::floor(x);  // torus coordinate
    if (t == 0.0) return A * std::sin(kTwoPi * x);
    double tstar = burgers_shock_time(A);
    if (t < tstar) {
        // globally monotone characteristic map; root within |xi - x| <= tA
        return A * std::sin(kTwoPi * detail_oracle::char_root(A, t, x, x - t * A, x + t * A));
    }
    if (x == 0.5 || x == 0.0) return 0.0;
    if (x < 0.5) {
        // monotone branch from xi = 0 up to the fold point
        double xistar = std::acos(std::clamp(-1.0 / (kTwoPi * t * A), -1.0, 1.0)) / kTwoPi;
        return A * std::sin(kTwoPi * detail_oracle::char_root(A, t, x, 0.0, xistar));
    }
    return -burgers_exact(A, t, 1.0 - x);
}

/// Nodal profile of the exact solution on a 1D grid.
inline Field burgers_exact_profile(const Grid& g, double A, double t) {
    if (g.dim() != 1) throw ContractError("scalar profile needs a 1D grid");
    Field f = make_field(g, 1);
    for (int i = 0; i < g.nx(); ++i) f.at(i, 0) = burgers_exact(A, t, g.coord(0, i));
    return f;
}

/// First-order Godunov reference on a fine grid (cross-validation of the
/// characteristic solution; piecewise-constant cell values).
inline std::vector<double> burgers_godunov(double A, double t, int cells = 8192, double cfl = 0.4) {
    std::vector<double> u(static_cast<std::size_t>(cells));
    const double dx = 1.0 / static_cast<double>(cells);
    for (int i = 0; i < cells; ++i)
        u[static_cast<std::size_t>(i)] = A * std::sin(kTwoPi * (static_cast<double>(i) + 0.5) * dx);
    auto numflux = [](double ul, double ur) {
        // exact Riemann flux for the convex quadratic
        if (ul <= ur) {
            if (ul >= 0.0) return 0.5 * ul * ul;
            if (ur <= 0.0) return 0.5 * ur * ur;
            return 0.0;
        }
        return 0.5 * std::max(ul * ul, ur * ur);
    };
    double time = 0.0;
    std::vector<double> flux(static_cast<std::size_t>(cells));
    while (time < t) {
        double umax = 1e-12;
        for (double v : u) umax = std::max(umax, std::abs(v));
        double dt = std::min(cfl * dx / umax, t - time);
        for (int i = 0; i < cells; ++i) {
            double ul = u[static_cast<std::size_t>(i)];
            double ur = u[static_cast<std::size_t>((i + 1) % cells)];
            flux[static_cast<std::size_t>(i)] = numflux(ul, ur);
        }
        for (int i = 0; i < cells; ++i) {
            double fin = flux[static_cast<std::size_t>((i + cells - 1) % cells)];
            u[static_cast<std::size_t>(i)] -= dt / dx * (flux[static_cast<std::size_t>(i)] - fin);
        }
        time += dt;
    }
    return u;
}

}  // namespace evs
