#pragma once

// Small-dimension (d <= 3) matrix algebra: symmetric/skew splits, signed
// semidefinite parts, spectral and trace norms. Everything is closed-form or
// a fixed short iteration so results are deterministic.

#include <array>
#include <cmath>
#include <utility>

#include "evs/errors.hpp"

namespace evs {

struct Mat {
    int dim = 0;
    std::array<double, 9> a{};  // row-major, unused entries zero

    static Mat zero(int d) { return Mat{d, {}}; }

    static Mat identity(int d) {
        Mat m{d, {}};
        for (int i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * dim + j)]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * dim + j)]; }
};

inline bool finite(const Mat& m) {
    for (int i = 0; i < m.dim * m.dim; ++i)
        if (!std::isfinite(m.a[static_cast<std::size_t>(i)])) return false;
    return true;
}

inline void require_finite(const Mat& m) {
    if (m.dim < 1 || m.dim > 3) throw ContractError("matrix dim must be 1..3");
    if (!finite(m)) throw DomainError("non-finite matrix entry");
}

/// (A + A^T)/2, entries computed once and mirrored so the result is
/// symmetric to the bit.
inline Mat sym_part(const Mat& A) {
    require_finite(A);
    Mat s = Mat::zero(A.dim);
    for (int i = 0; i < A.dim; ++i) {
        s(i, i) = A(i, i);
        for (int j = i + 1; j < A.dim; ++j) {
            double v = 0.5 * (A(i, j) + A(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

/// (A - A^T)/2.
inline Mat skw_part(const Mat& A) {
    require_finite(A);
    Mat s = Mat::zero(A.dim);
    for (int i = 0; i < A.dim; ++i)
        for (int j = i + 1; j < A.dim; ++j) {
            double v = 0.5 * (A(i, j) - A(j, i));
            s(i, j) = v;
            s(j, i) = -v;
        }
    return s;
}

struct SymEigen {
    int dim = 0;
    std::array<double, 3> values{};          // ascending
    std::array<std::array<double, 3>, 3> vectors{};  // vectors[k] = unit eigenvector for values[k]
};

namespace detail {

inline double max_abs(const Mat& m) {
    double r = 0.0;
    for (int i = 0; i < m.dim * m.dim; ++i) r = std::max(r, std::abs(m.a[static_cast<std::size_t>(i)]));
    return r;
}

inline void check_symmetric(const Mat& S, double tol) {
    for (int i = 0; i < S.dim; ++i)
        for (int j = i + 1; j < S.dim; ++j)
            if (std::abs(S(i, j) - S(j, i)) > tol)
                throw ContractError("matrix not symmetric within tolerance");
}

inline std::array<double, 3> cross3(const std::array<double, 3>& u, const std::array<double, 3>& v) {
    return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}

inline double norm3(const std::array<double, 3>& u) {
    return std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
}

// One cyclic Jacobi sweep: rotates (p,q) planes of M to kill off-diagonals,
// accumulating the rotations into the eigenvector rows of `eig`. Polishes the
// closed-form decomposition near eigenvalue clusters.
inline void jacobi_sweep3(Mat& M, SymEigen& eig) {
    constexpr std::array<std::pair<int, int>, 3> planes{{{0, 1}, {0, 2}, {1, 2}}};
    for (auto [p, q] : planes) {
        double apq = M(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double tau = (M(q, q) - M(p, p)) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        // M <- J^T M J with J the (p,q) rotation
        for (int k = 0; k < 3; ++k) {
            double mkp = M(k, p), mkq = M(k, q);
            M(k, p) = c * mkp - s * mkq;
            M(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < 3; ++k) {
            double mpk = M(p, k), mqk = M(q, k);
            M(p, k) = c * mpk - s * mqk;
            M(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < 3; ++k) {
            double vp = eig.vectors[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
            double vq = eig.vectors[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)];
            eig.vectors[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] = c * vp - s * vq;
            eig.vectors[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = s * vp + c * vq;
        }
    }
}

}  // namespace detail

/// Eigendecomposition of a symmetric matrix, ascending eigenvalues.
/// d=2 closed form; d=3 trigonometric Cardano with one Jacobi sweep polish.
inline SymEigen sym_eigen(const Mat& S) {
    require_finite(S);
    detail::check_symmetric(S, 1e-12 * (1.0 + detail::max_abs(S)));
    SymEigen e;
    e.dim = S.dim;
    if (S.dim == 1) {
        e.values[0] = S(0, 0);
        e.vectors[0] = {1.0, 0.0, 0.0};
        return e;
    }
    if (S.dim == 2) {
        double a = S(0, 0), b = 0.5 * (S(0, 1) + S(1, 0)), c = S(1, 1);
        double mid = 0.5 * (a + c);
        double r = std::hypot(0.5 * (a - c), b);
        double lo = mid - r, hi = mid + r;
        std::array<double, 3> vhi{};
        if (b != 0.0) {
            // two algebraically equivalent eigenvector formulas; take the
            // better-conditioned one
            std::array<double, 3> u{b, hi - a, 0.0};
            std::array<double, 3> w{hi - c, b, 0.0};
            double nu = u[0] * u[0] + u[1] * u[1];
            double nw = w[0] * w[0] + w[1] * w[1];
            vhi = nu >= nw ? u : w;
        } else {
            vhi = a >= c ? std::array<double, 3>{1.0, 0.0, 0.0} : std::array<double, 3>{0.0, 1.0, 0.0};
        }
        double n = std::hypot(vhi[0], vhi[1]);
        vhi[0] /= n;
        vhi[1] /= n;
        e.values = {lo, hi, 0.0};
        e.vectors[1] = vhi;
        e.vectors[0] = {-vhi[1], vhi[0], 0.0};
        return e;
    }
    // d = 3: trigonometric Cardano
    double q = (S(0, 0) + S(1, 1) + S(2, 2)) / 3.0;
    double p1 = S(0, 1) * S(0, 1) + S(0, 2) * S(0, 2) + S(1, 2) * S(1, 2);
    std::array<double, 3> vals{};
    if (p1 < 1e-300 * (1.0 + q * q)) {
        vals = {S(0, 0), S(1, 1), S(2, 2)};
        e.vectors = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    } else {
        double p2 = 0.0;
        for (int i = 0; i < 3; ++i) p2 += (S(i, i) - q) * (S(i, i) - q);
        p2 += 2.0 * p1;
        double p = std::sqrt(p2 / 6.0);
        Mat B = Mat::zero(3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) B(i, j) = (S(i, j) - (i == j ? q : 0.0)) / p;
        double detB = B(0, 0) * (B(1, 1) * B(2, 2) - B(1, 2) * B(2, 1)) -
                      B(0, 1) * (B(1, 0) * B(2, 2) - B(1, 2) * B(2, 0)) +
                      B(0, 2) * (B(1, 0) * B(2, 1) - B(1, 1) * B(2, 0));
        double r = std::clamp(detB / 2.0, -1.0, 1.0);
        double phi = std::acos(r) / 3.0;
        double hi = q + 2.0 * p * std::cos(phi);
        double lo = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
        vals = {lo, 3.0 * q - lo - hi, hi};
        // eigenvectors from row cross products of S - lambda I
        for (int k = 0; k < 3; ++k) {
            std::array<std::array<double, 3>, 3> rows{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                        S(i, j) - (i == j ? vals[static_cast<std::size_t>(k)] : 0.0);
            std::array<double, 3> best{};
            double bestn = -1.0;
            for (auto [i, j] : std::array<std::pair<int, int>, 3>{{{0, 1}, {0, 2}, {1, 2}}}) {
                auto cr = detail::cross3(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
                double n = detail::norm3(cr);
                if (n > bestn) {
                    bestn = n;
                    best = cr;
                }
            }
            if (bestn < 1e-12 * (1.0 + detail::max_abs(S))) best = {k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, k == 2 ? 1.0 : 0.0};
            e.vectors[static_cast<std::size_t>(k)] = best;
        }
        // Gram-Schmidt in order, then polish
        for (int k = 0; k < 3; ++k) {
            auto& v = e.vectors[static_cast<std::size_t>(k)];
            for (int j = 0; j < k; ++j) {
                const auto& u = e.vectors[static_cast<std::size_t>(j)];
                double d = v[0] * u[0] + v[1] * u[1] + v[2] * u[2];
                for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(i)] -= d * u[static_cast<std::size_t>(i)];
            }
            double n = detail::norm3(v);
            if (n < 1e-14) {
                v = detail::cross3(e.vectors[0], e.vectors[1]);
                n = detail::norm3(v);
                if (n < 1e-14) v = {0, 0, 1}, n = 1.0;
            }
            for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(i)] /= n;
        }
    }
    e.values = vals;
    // polish: M = V S V^T should be near-diagonal; one Jacobi sweep
    Mat M = Mat::zero(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    s += e.vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * S(k, l) *
                         e.vectors[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
            M(i, j) = s;
        }
    detail::jacobi_sweep3(M, e);
    for (int i = 0; i < 3; ++i) e.values[static_cast<std::size_t>(i)] = M(i, i);
    // sort ascending
    std::array<int, 3> idx{0, 1, 2};
    for (int i = 0; i < 2; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (e.values[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] <
                e.values[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])])
                std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    SymEigen out;
    out.dim = 3;
    for (int k = 0; k < 3; ++k) {
        out.values[static_cast<std::size_t>(k)] = e.values[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        out.vectors[static_cast<std::size_t>(k)] = e.vectors[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    return out;
}

/// Largest singular value. For symmetric input this is max |eigenvalue|.
inline double spectral_norm(const Mat& A) {
    require_finite(A);
    if (A.dim == 1) return std::abs(A(0, 0));
    // form A^T A (symmetric PSD) and take sqrt of its top eigenvalue
    Mat G = Mat::zero(A.dim);
    for (int i = 0; i < A.dim; ++i)
        for (int j = i; j < A.dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < A.dim; ++k) s += A(k, i) * A(k, j);
            G(i, j) = s;
            G(j, i) = s;
        }
    SymEigen e = sym_eigen(G);
    double top = std::max(0.0, e.values[static_cast<std::size_t>(A.dim - 1)]);
    return std::sqrt(top);
}

/// Signed semidefinite split S = S_plus + S_minus via eigendecomposition.
/// Eigenvalues within 1e-14*(1+|S|_2) of zero count as zero and land in the
/// positive part, so PSD inputs with rounding noise get S_minus = 0.
inline std::pair<Mat, Mat> sym_signed_parts(const Mat& S) {
    require_finite(S);
    detail::check_symmetric(S, 1e-12);
    SymEigen e = sym_eigen(sym_part(S));
    double thresh = 1e-14 * (1.0 + spectral_norm(S));
    Mat plus = Mat::zero(S.dim), minus = Mat::zero(S.dim);
    for (int k = 0; k < S.dim; ++k) {
        double lam = e.values[static_cast<std::size_t>(k)];
        Mat& dst = (lam >= -thresh) ? plus : minus;
        const auto& v = e.vectors[static_cast<std::size_t>(k)];
        for (int i = 0; i < S.dim; ++i)
            for (int j = 0; j < S.dim; ++j)
                dst(i, j) += lam * v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
    }
    return {plus, minus};
}

/// Trace norm (sum of |eigenvalue|) of a symmetric matrix; equals trace for PSD.
inline double trace_norm(const Mat& S) {
    require_finite(S);
    detail::check_symmetric(S, 1e-12);
    SymEigen e = sym_eigen(sym_part(S));
    double s = 0.0;
    for (int k = 0; k < S.dim; ++k) s += std::abs(e.values[static_cast<std::size_t>(k)]);
    return s;
}

/// max(0, -lambda_min(S)): the spectral norm of the negative semidefinite
/// part, computed without forming it. This is the kernel of every
/// negative-part regularity weight.
inline double neg_part_norm(const Mat& S) {
    require_finite(S);
    SymEigen e = sym_eigen(sym_part(S));
    return std::max(0.0, -e.values[0]);
}

}  // namespace evs
