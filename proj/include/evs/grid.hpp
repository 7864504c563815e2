#pragma once

// Uniform periodic grids on the flat torus (1D or 2D), nodal state fields,
// quadrature, and spectral operations (derivatives, band-limit filters,
// divergence-free projection). Node ordering is x-fastest: node = ix + nx*iy;
// state data is node-major: data[node*m + c].

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "evs/errors.hpp"
#include "evs/fft.hpp"
#include "evs/summation.hpp"

namespace evs {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

class Grid {
  public:
    Grid(int d, int nx, int ny) : d_(d), n_{nx, ny}, px_(nx), py_(d == 2 ? FftPlan(ny) : FftPlan()) {}

    int dim() const { return d_; }
    int nx() const { return n_[0]; }
    int ny() const { return n_[1]; }
    int extent(int axis) const { return n_[static_cast<std::size_t>(axis)]; }
    int total() const { return n_[0] * n_[1]; }

    /// Node coordinate along an axis: i / n.
    double coord(int axis, int i) const { return static_cast<double>(i) / static_cast<double>(extent(axis)); }

    /// Integer wavenumber for FFT bin i along an axis (i <= n/2 maps to i,
    /// else i - n).
    int wavenumber(int axis, int i) const {
        int n = extent(axis);
        return i <= n / 2 ? i : i - n;
    }

    bool is_nyquist(int axis, int i) const { return i == extent(axis) / 2; }

    const FftPlan& plan(int axis) const { return axis == 0 ? px_ : py_; }

  private:
    int d_;
    std::array<int, 2> n_;
    FftPlan px_, py_;
};

/// Build a torus grid; each axis must be a power of two in [8, 4096].
inline Grid make_grid(int d, int nx, int ny = 0) {
    if (d != 1 && d != 2) throw ConfigError("grid dimension must be 1 or 2");
    if (d == 1) ny = 1;
    if (ny == 0) ny = nx;
    auto check = [](int n) {
        if (!is_pow2(n) || n < 8 || n > 4096) throw ConfigError("grid size must be a power of two in [8, 4096]");
    };
    check(nx);
    if (d == 2) check(ny);
    return Grid(d, nx, ny);
}

/// Nodal multi-component field over a grid.
struct Field {
    int d = 0;
    int m = 0;
    std::array<int, 2> n{1, 1};
    std::vector<double> data;

    int total() const { return n[0] * n[1]; }
    int node(int ix, int iy) const { return ix + n[0] * iy; }

    double& at(int node_idx, int c) { return data[static_cast<std::size_t>(node_idx * m + c)]; }
    double at(int node_idx, int c) const { return data[static_cast<std::size_t>(node_idx * m + c)]; }
};

inline Field make_field(const Grid& g, int m) {
    Field f;
    f.d = g.dim();
    f.m = m;
    f.n = {g.nx(), g.ny()};
    f.data.assign(static_cast<std::size_t>(g.total() * m), 0.0);
    return f;
}

inline void require_same_shape(const Field& a, const Field& b) {
    if (a.d != b.d || a.m != b.m || a.n != b.n) throw ContractError("field shape mismatch");
}

inline void require_matches(const Grid& g, const Field& f) {
    if (f.d != g.dim() || f.n[0] != g.nx() || f.n[1] != g.ny()) throw ContractError("field does not match grid");
}

/// Torus integral of a nodal scalar sample (compensated mean; cell volume
/// 1/total). Exact for band-limited integrands below the grid Nyquist.
inline double integrate(const Grid& g, std::span<const double> nodal) {
    if (static_cast<int>(nodal.size()) != g.total()) throw ContractError("integrand size mismatch");
    StableSum s;
    for (double v : nodal) s.add(v);
    return s.value() / static_cast<double>(g.total());
}

/// Torus integral of one component of a field.
inline double integrate_component(const Grid& g, const Field& f, int c) {
    require_matches(g, f);
    StableSum s;
    for (int i = 0; i < f.total(); ++i) s.add(f.at(i, c));
    return s.value() / static_cast<double>(g.total());
}

/// L2 inner product over all components: sum A_i B_i / total.
inline double inner(const Grid& g, const Field& a, const Field& b) {
    require_same_shape(a, b);
    require_matches(g, a);
    return stable_dot(a.data, b.data) / static_cast<double>(g.total());
}

inline double mean_component(const Grid& g, const Field& f, int c) { return integrate_component(g, f, c); }

// ---------------------------------------------------------------------------
// Spectral helpers

using Modes = std::vector<std::complex<double>>;

/// Forward transform of one component into mode coefficients (layout matches
/// the nodal layout: bin = kx_index + nx*ky_index).
inline Modes to_modes(const Grid& g, const Field& f, int c) {
    require_matches(g, f);
    const int nx = g.nx(), ny = g.ny(), total = g.total();
    Modes buf(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) buf[static_cast<std::size_t>(i)] = f.at(i, c);
    for (int iy = 0; iy < ny; ++iy) g.plan(0).transform(buf.data() + static_cast<std::ptrdiff_t>(nx) * iy, -1);
    if (g.dim() == 2) {
        Modes col(static_cast<std::size_t>(ny));
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < ny; ++iy) col[static_cast<std::size_t>(iy)] = buf[static_cast<std::size_t>(ix + nx * iy)];
            g.plan(1).transform(col.data(), -1);
            for (int iy = 0; iy < ny; ++iy) buf[static_cast<std::size_t>(ix + nx * iy)] = col[static_cast<std::size_t>(iy)];
        }
    }
    // normalize so coefficients are Fourier coefficients (mean at bin 0)
    double inv = 1.0 / static_cast<double>(total);
    for (auto& z : buf) z *= inv;
    return buf;
}

/// Inverse transform writing the real part into component c.
inline void from_modes(const Grid& g, Modes modes, Field& f, int c) {
    require_matches(g, f);
    const int nx = g.nx(), ny = g.ny(), total = g.total();
    if (static_cast<int>(modes.size()) != total) throw ContractError("mode buffer size mismatch");
    // undo the forward normalization: inverse transform includes 1/n per axis
    double scale = static_cast<double>(total);
    for (auto& z : modes) z *= scale;
    if (g.dim() == 2) {
        Modes col(static_cast<std::size_t>(ny));
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < ny; ++iy) col[static_cast<std::size_t>(iy)] = modes[static_cast<std::size_t>(ix + nx * iy)];
            g.plan(1).transform(col.data(), +1);
            for (int iy = 0; iy < ny; ++iy) modes[static_cast<std::size_t>(ix + nx * iy)] = col[static_cast<std::size_t>(iy)];
        }
    }
    for (int iy = 0; iy < ny; ++iy) g.plan(0).transform(modes.data() + static_cast<std::ptrdiff_t>(nx) * iy, +1);
    for (int i = 0; i < total; ++i) f.at(i, c) = modes[static_cast<std::size_t>(i)].real();
}

/// Multiply modes by i*2*pi*k along an axis (spectral derivative); the
/// Nyquist row is zeroed so the operator is exactly skew-adjoint.
inline void derivative_modes(const Grid& g, Modes& modes, int axis) {
    const int nx = g.nx(), ny = g.ny();
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            auto& z = modes[static_cast<std::size_t>(ix + nx * iy)];
            int i = axis == 0 ? ix : iy;
            if (g.is_nyquist(axis, i)) {
                z = 0.0;
                continue;
            }
            double k = kTwoPi * static_cast<double>(g.wavenumber(axis, i));
            z = std::complex<double>(-k * z.imag(), k * z.real());
        }
}

/// Zero every mode with max_axis |k| > cutoff, and the Nyquist rows always.
inline void band_filter_modes(const Grid& g, Modes& modes, int cutoff) {
    const int nx = g.nx(), ny = g.ny();
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            bool kill = g.is_nyquist(0, ix) || std::abs(g.wavenumber(0, ix)) > cutoff;
            if (g.dim() == 2) kill = kill || g.is_nyquist(1, iy) || std::abs(g.wavenumber(1, iy)) > cutoff;
            if (kill) modes[static_cast<std::size_t>(ix + nx * iy)] = 0.0;
        }
}

/// Nodal derivative of one component along an axis.
inline std::vector<double> derivative_component(const Grid& g, const Field& f, int c, int axis) {
    Modes m = to_modes(g, f, c);
    derivative_modes(g, m, axis);
    Field tmp = make_field(g, 1);
    from_modes(g, m, tmp, 0);
    return tmp.data;
}

/// Project a pair of components (c0, c0+1) of a 2D field onto its
/// divergence-free part: v_k <- v_k - k (k . v_k)/|k|^2 for k != 0.
/// Nyquist rows are annihilated: their wavenumber sign is ambiguous on a real
/// grid (the derivative zeroes them too), and keeping them would leave modes
/// the divergence operator still sees along the other axis. With them removed
/// the projection is symmetric, idempotent to rounding, and its range is
/// exactly the discrete kernel of the divergence; the zero mode (the mean) is
/// untouched.
inline void leray_project(const Grid& g, Field& f, int c0) {
    if (g.dim() != 2) throw ContractError("divergence-free projection needs a 2D grid");
    if (c0 + 1 >= f.m) throw ContractError("component pair out of range");
    Modes vx = to_modes(g, f, c0);
    Modes vy = to_modes(g, f, c0 + 1);
    const int nx = g.nx(), ny = g.ny();
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            std::size_t idx = static_cast<std::size_t>(ix + nx * iy);
            if (g.is_nyquist(0, ix) || g.is_nyquist(1, iy)) {
                vx[idx] = 0.0;
                vy[idx] = 0.0;
                continue;
            }
            int kx = g.wavenumber(0, ix), ky = g.wavenumber(1, iy);
            if (kx == 0 && ky == 0) continue;
            double k2 = static_cast<double>(kx) * kx + static_cast<double>(ky) * ky;
            std::complex<double> dot = (static_cast<double>(kx) * vx[idx] + static_cast<double>(ky) * vy[idx]) / k2;
            vx[idx] -= static_cast<double>(kx) * dot;
            vy[idx] -= static_cast<double>(ky) * dot;
        }
    from_modes(g, std::move(vx), f, c0);
    from_modes(g, std::move(vy), f, c0 + 1);
}

/// Nodal divergence of a 2D component pair (diagnostic).
inline std::vector<double> divergence(const Grid& g, const Field& f, int c0) {
    auto dx = derivative_component(g, f, c0, 0);
    auto dy = derivative_component(g, f, c0 + 1, 1);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    return dx;
}

}  // namespace evs
