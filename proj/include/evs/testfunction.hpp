#pragma once

// Finite trigonometric test functions with analytic gradients, and the
// shared mode basis they are expanded in. A test function stores one
// coefficient vector per test component over the basis
// {1, cos(2*pi*k.x), sin(2*pi*k.x) : |k|_inf <= N, k canonical}.

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "evs/grid.hpp"

namespace evs {

enum class SystemTag { burgers, euler, mhd, compressible };

/// Number of test-function components for a system on a d-torus.
inline int test_components(SystemTag sys, int d) {
    switch (sys) {
        case SystemTag::burgers: return 1;
        case SystemTag::euler: return d;
        case SystemTag::mhd: return 2 * d;
        case SystemTag::compressible: return d + 1;
    }
    throw ContractError("unknown system tag");
}

/// Number of conserved-state components for a system on a d-torus.
inline int state_components(SystemTag sys, int d) { return test_components(sys, d); }

enum class Trig { one, cosine, sine };

struct BasisFn {
    std::array<int, 2> k{0, 0};
    Trig trig = Trig::one;
};

/// Canonical wave list: k = 0 plus one representative per +/- pair
/// (k1 > 0, or k1 == 0 and k2 > 0), with |k|_inf <= N.
inline std::vector<std::array<int, 2>> canonical_waves(int d, int N) {
    std::vector<std::array<int, 2>> waves;
    waves.push_back({0, 0});
    if (d == 1) {
        for (int k = 1; k <= N; ++k) waves.push_back({k, 0});
    } else {
        for (int k1 = 0; k1 <= N; ++k1)
            for (int k2 = -N; k2 <= N; ++k2) {
                if (k1 == 0 && k2 <= 0) continue;
                waves.push_back({k1, k2});
            }
    }
    return waves;
}

/// Grid-independent enumeration of the basis functions for (d, N); index
/// agreement between coefficient vectors and nodal tables rests on this.
inline std::vector<BasisFn> basis_functions(int d, int N) {
    std::vector<BasisFn> fns;
    for (const auto& k : canonical_waves(d, N)) {
        if (k[0] == 0 && k[1] == 0) {
            fns.push_back({k, Trig::one});
        } else {
            fns.push_back({k, Trig::cosine});
            fns.push_back({k, Trig::sine});
        }
    }
    return fns;
}

/// Shared nodal tables for the basis functions on one grid.
class TestBasis {
  public:
    TestBasis(const Grid& g, int d, int N) : d_(d), N_(N), total_(g.total()) {
        if (g.dim() != d) throw ContractError("basis dimension mismatch");
        fns_ = basis_functions(d, N);
        values_.resize(fns_.size());
        for (std::size_t b = 0; b < fns_.size(); ++b) {
            auto& tab = values_[b];
            tab.resize(static_cast<std::size_t>(total_));
            const auto& fn = fns_[b];
            for (int iy = 0; iy < g.ny(); ++iy)
                for (int ix = 0; ix < g.nx(); ++ix) {
                    double phase = kTwoPi * (static_cast<double>(fn.k[0]) * g.coord(0, ix) +
                                             (d == 2 ? static_cast<double>(fn.k[1]) * g.coord(1, iy) : 0.0));
                    double v = fn.trig == Trig::one ? 1.0 : (fn.trig == Trig::cosine ? std::cos(phase) : std::sin(phase));
                    tab[static_cast<std::size_t>(ix + g.nx() * iy)] = v;
                }
        }
        // index of the trig twin (cos <-> sin with the same wave); one -> self
        twin_.resize(fns_.size());
        for (std::size_t b = 0; b < fns_.size(); ++b) {
            if (fns_[b].trig == Trig::one)
                twin_[b] = b;
            else
                twin_[b] = fns_[b].trig == Trig::cosine ? b + 1 : b - 1;
        }
    }

    int dim() const { return d_; }
    int max_mode() const { return N_; }
    int total_nodes() const { return total_; }
    int size() const { return static_cast<int>(fns_.size()); }
    const BasisFn& fn(int b) const { return fns_[static_cast<std::size_t>(b)]; }
    const std::vector<double>& table(int b) const { return values_[static_cast<std::size_t>(b)]; }

    /// d(basis_b)/dx_axis = factor * basis_{twin(b)}.
    double deriv_factor(int b, int axis) const {
        const auto& fn = fns_[static_cast<std::size_t>(b)];
        if (fn.trig == Trig::one) return 0.0;
        double kax = kTwoPi * static_cast<double>(fn.k[static_cast<std::size_t>(axis)]);
        return fn.trig == Trig::cosine ? -kax : kax;
    }

    std::size_t twin(int b) const { return twin_[static_cast<std::size_t>(b)]; }

  private:
    int d_, N_, total_;
    std::vector<BasisFn> fns_;
    std::vector<std::vector<double>> values_;
    std::vector<std::size_t> twin_;
};

/// One test function: a coefficient vector per test component over the
/// (d, N) mode basis, tagged with the system whose admissibility constraint
/// it satisfies. The nodal-table pointer is attached lazily when a grid is
/// known; coefficients are meaningful without it.
struct TestFunction {
    SystemTag sys = SystemTag::burgers;
    int d = 1;
    int N = 1;
    int mtest = 1;
    std::shared_ptr<const TestBasis> basis;  // optional until evaluation
    std::vector<std::vector<double>> coef;   // [component][basis index]

    static TestFunction zero(SystemTag sys, int d, int N) {
        TestFunction t;
        t.sys = sys;
        t.d = d;
        t.N = N;
        t.mtest = test_components(sys, d);
        t.coef.assign(static_cast<std::size_t>(t.mtest),
                      std::vector<double>(basis_functions(d, N).size(), 0.0));
        return t;
    }

    TestFunction scaled(double alpha) const {
        TestFunction t = *this;
        for (auto& comp : t.coef)
            for (double& c : comp) c *= alpha;
        return t;
    }
};

/// Attach nodal tables for a grid (reusing a caller-provided shared basis
/// when its shape matches).
inline void bind_basis(TestFunction& phi, const Grid& g, std::shared_ptr<const TestBasis> shared = nullptr) {
    if (shared && shared->dim() == phi.d && shared->max_mode() == phi.N && shared->total_nodes() == g.total()) {
        phi.basis = std::move(shared);
        return;
    }
    phi.basis = std::make_shared<TestBasis>(g, phi.d, phi.N);
}

struct TestEval {
    Field values;    // m = mtest
    Field gradient;  // m = mtest * d, component index comp*d + axis
};

/// Evaluate a test function and its analytic gradient on grid nodes.
inline TestEval eval_test(const TestFunction& phi, const Grid& g) {
    if (!phi.basis) throw ContractError("test function has no nodal tables bound");
    if (phi.basis->total_nodes() != g.total() || phi.basis->dim() != g.dim())
        throw ContractError("test function basis does not match grid");
    const int total = g.total(), d = g.dim(), mt = phi.mtest;
    TestEval out{make_field(g, mt), make_field(g, mt * d)};
    const TestBasis& B = *phi.basis;
    for (int c = 0; c < mt; ++c) {
        const auto& cc = phi.coef[static_cast<std::size_t>(c)];
        for (int b = 0; b < B.size(); ++b) {
            double coef = cc[static_cast<std::size_t>(b)];
            if (coef == 0.0) continue;
            const auto& tab = B.table(b);
            for (int i = 0; i < total; ++i) out.values.at(i, c) += coef * tab[static_cast<std::size_t>(i)];
            for (int axis = 0; axis < d; ++axis) {
                double f = coef * B.deriv_factor(b, axis);
                if (f == 0.0) continue;
                const auto& twin = B.table(static_cast<int>(B.twin(b)));
                for (int i = 0; i < total; ++i)
                    out.gradient.at(i, c * d + axis) += f * twin[static_cast<std::size_t>(i)];
            }
        }
    }
    return out;
}

}  // namespace evs
