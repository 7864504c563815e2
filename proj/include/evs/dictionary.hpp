#pragma once

// Test-function dictionaries: the finite battery of admissible trig atoms a
// run certifies against, plus nodal tables for fast per-step certificate
// evaluation and the deterministic worst-direction coefficient ascent.

#include <cmath>
#include <memory>
#include <vector>

#include "evs/system.hpp"
#include "evs/testfunction.hpp"

namespace evs {

/// Symbolic dictionary: atoms (unit-coefficient admissible test functions)
/// and members (zero plus each atom with both signs).
struct Dictionary {
    SystemTag sys = SystemTag::burgers;
    int d = 1;
    int N = 1;
    std::vector<TestFunction> atoms;
    std::vector<TestFunction> members;  // [0] = zero, then +atom_i, -atom_i
};

/// Enumerate the admissible atoms: every mode |k|_inf <= N (canonical sign),
/// every trig, and per system one direction per admissible component block —
/// divergence-free directions for velocity/magnetic blocks, unconstrained
/// unit directions for scalar and compressible components. Constants (k = 0)
/// are included per component block.
inline Dictionary build_dictionary(const SystemSpec& sys, int N) {
    if (N < 1) throw ConfigError("dictionary mode bound must be >= 1");
    Dictionary dict;
    dict.sys = sys.tag();
    dict.d = sys.dim();
    dict.N = N;
    const int d = sys.dim();
    auto fns = basis_functions(d, N);

    auto add_atom = [&](int b, const std::vector<double>& dir, int comp_offset) {
        TestFunction t = TestFunction::zero(sys.tag(), d, N);
        for (std::size_t c = 0; c < dir.size(); ++c)
            t.coef[static_cast<std::size_t>(comp_offset) + c][static_cast<std::size_t>(b)] = dir[c];
        dict.atoms.push_back(std::move(t));
    };

    for (int b = 0; b < static_cast<int>(fns.size()); ++b) {
        const BasisFn& fn = fns[static_cast<std::size_t>(b)];
        bool is_const = fn.trig == Trig::one;
        switch (sys.tag()) {
            case SystemTag::burgers:
                add_atom(b, {1.0}, 0);
                break;
            case SystemTag::euler:
            case SystemTag::mhd: {
                int blocks = sys.tag() == SystemTag::mhd ? 2 : 1;
                for (int blk = 0; blk < blocks; ++blk) {
                    if (is_const) {
                        add_atom(b, {1.0, 0.0}, blk * d);
                        add_atom(b, {0.0, 1.0}, blk * d);
                    } else {
                        double k1 = static_cast<double>(fn.k[0]), k2 = static_cast<double>(fn.k[1]);
                        double norm = std::hypot(k1, k2);
                        add_atom(b, {-k2 / norm, k1 / norm}, blk * d);
                    }
                }
                break;
            }
            case SystemTag::compressible:
                for (int c = 0; c <= d; ++c) {
                    std::vector<double> dir(static_cast<std::size_t>(d) + 1, 0.0);
                    dir[static_cast<std::size_t>(c)] = 1.0;
                    add_atom(b, dir, 0);
                }
                break;
        }
    }

    dict.members.push_back(TestFunction::zero(sys.tag(), d, N));
    for (const auto& a : dict.atoms) {
        dict.members.push_back(a);
        dict.members.push_back(a.scaled(-1.0));
    }
    return dict;
}

struct StepCertificate {
    double r_star = 0.0;        // worst discrete-inequality residual
    int worst_index = 0;        // member index; -1 when the ascent pass wins
    int iterations = 0;         // inner-solver iterations (filled by the stepper)
    double e_prev = 0.0;        // E^{n-1}
    double e_next = 0.0;        // E(U^n)
    double feasibility_slack = 0.0;  // E(U^n) - E^{n-1} (<= 0 when feasible)
};

/// Grid-bound dictionary tables: nodal values/gradients per atom, regularity
/// weights per member, and the certificate evaluator.
class DictionaryTables {
  public:
    DictionaryTables(const SystemSpec& sys, const Dictionary& dict, const Grid& g)
        : sys_(&sys), g_(&g), dict_(dict) {
        basis_ = std::make_shared<TestBasis>(g, dict.d, dict.N);
        for (auto& a : dict_.atoms) a.basis = basis_;
        for (auto& m : dict_.members) m.basis = basis_;
        atom_eval_.reserve(dict_.atoms.size());
        for (const auto& a : dict_.atoms) atom_eval_.push_back(eval_test(a, g));
        // member j=0 is zero (K=0); members 1+2i, 2+2i are +/- atom i
        member_K_.assign(dict_.members.size(), 0.0);
        Field neg = make_field(g, sys.components() * sys.dim());
        for (std::size_t i = 0; i < dict_.atoms.size(); ++i) {
            const Field& grad = atom_eval_[i].gradient;
            member_K_[1 + 2 * i] = sys.reg_weight_from_gradient(g, grad);
            neg = grad;
            for (double& v : neg.data) v = -v;
            member_K_[2 + 2 * i] = sys.reg_weight_from_gradient(g, neg);
        }
    }

    const Dictionary& dictionary() const { return dict_; }
    const std::shared_ptr<const TestBasis>& basis() const { return basis_; }
    int member_count() const { return static_cast<int>(dict_.members.size()); }
    int atom_count() const { return static_cast<int>(dict_.atoms.size()); }
    const TestFunction& member(int j) const { return dict_.members[static_cast<std::size_t>(j)]; }
    double member_weight(int j) const { return member_K_[static_cast<std::size_t>(j)]; }
    const TestEval& atom_eval(int i) const { return atom_eval_[static_cast<std::size_t>(i)]; }

    /// Linear certificate terms per atom: L_a = -<U - U_prev, a> + tau * integrate(F(U) : grad a).
    std::vector<double> linear_terms(const Field& U_prev, const Field& U, const std::vector<double>& flux_buf,
                                     double tau) const {
        const double total = static_cast<double>(g_->total());
        Field dU = U;
        for (std::size_t i = 0; i < dU.data.size(); ++i) dU.data[i] -= U_prev.data[i];
        std::vector<double> L(atom_eval_.size());
        for (std::size_t a = 0; a < atom_eval_.size(); ++a) {
            double pair_du = stable_dot(dU.data, atom_eval_[a].values.data) / total;
            double pair_flux = stable_dot(flux_buf, atom_eval_[a].gradient.data) / total;
            L[a] = -pair_du + tau * pair_flux;
        }
        return L;
    }

    /// Evaluate the discrete-inequality residual for every member, take the
    /// max (ties to the lowest index), then refine with one deterministic
    /// coefficient-ascent pass over the atom span (sup-norm ball of radius
    /// 10); the refined value replaces r* when it exceeds the member max.
    StepCertificate certify(const Field& U_prev, double e_prev, const Field& U, double tau,
                            bool with_ascent = true) const {
        StepCertificate cert;
        cert.e_prev = e_prev;
        EnergyValue e = total_entropy(sys_->entropy(), *g_, U);
        if (!e.finite) {
            cert.e_next = kInf;
            cert.feasibility_slack = kInf;
            cert.r_star = kInf;
            return cert;
        }
        cert.e_next = e.value;
        cert.feasibility_slack = e.value - e_prev;
        const double dE = e.value - e_prev;
        std::vector<double> flux_buf = sys_->flux_nodal(*g_, U);
        std::vector<double> L = linear_terms(U_prev, U, flux_buf, tau);

        double best = dE;  // zero member: f = dE
        int best_idx = 0;
        for (std::size_t a = 0; a < L.size(); ++a) {
            double fp = (1.0 + tau * member_K_[1 + 2 * a]) * dE + L[a];
            double fm = (1.0 + tau * member_K_[2 + 2 * a]) * dE - L[a];
            if (fp > best) {
                best = fp;
                best_idx = static_cast<int>(1 + 2 * a);
            }
            if (fm > best) {
                best = fm;
                best_idx = static_cast<int>(2 + 2 * a);
            }
        }
        cert.r_star = best;
        cert.worst_index = best_idx;

        if (with_ascent && !dict_.atoms.empty()) {
            double refined = ascent_pass(dE, L, tau, best_idx);
            if (refined > cert.r_star) {
                cert.r_star = refined;
                cert.worst_index = -1;
            }
        }
        return cert;
    }

    /// Regularity weight of a coefficient combination over the atoms,
    /// evaluated from the combined nodal gradient.
    double combo_weight(const std::vector<double>& c) const {
        Field G = make_field(*g_, sys_->components() * sys_->dim());
        for (std::size_t a = 0; a < c.size(); ++a) {
            if (c[a] == 0.0) continue;
            const auto& ga = atom_eval_[a].gradient.data;
            for (std::size_t i = 0; i < G.data.size(); ++i) G.data[i] += c[a] * ga[i];
        }
        return sys_->reg_weight_from_gradient(*g_, G);
    }

    /// The combination as a bound test function (for reporting/diagnostics).
    TestFunction combo(const std::vector<double>& c) const {
        TestFunction t = TestFunction::zero(dict_.sys, dict_.d, dict_.N);
        t.basis = basis_;
        for (std::size_t a = 0; a < c.size(); ++a)
            for (int comp = 0; comp < t.mtest; ++comp)
                for (std::size_t b = 0; b < t.coef[static_cast<std::size_t>(comp)].size(); ++b)
                    t.coef[static_cast<std::size_t>(comp)][b] +=
                        c[a] * dict_.atoms[a].coef[static_cast<std::size_t>(comp)][b];
        return t;
    }

  private:
    // Coordinate ascent of f(c) = (1 + tau K(c)) dE + sum_a c_a L_a over the
    // ball |c_a| <= 10. f is concave in c (dE <= 0 certified runs; K convex),
    // so a golden-section line step per coordinate converges monotonically.
    // Fixed evaluation schedule => deterministic, reproducible in replay.
    double ascent_pass(double dE, const std::vector<double>& L, double tau, int start_member) const {
        const int na = static_cast<int>(L.size());
        std::vector<double> c(static_cast<std::size_t>(na), 0.0);
        if (start_member > 0) {
            int atom = (start_member - 1) / 2;
            c[static_cast<std::size_t>(atom)] = (start_member % 2 == 1) ? 1.0 : -1.0;
        }
        // incremental combined gradient
        Field G = make_field(*g_, sys_->components() * sys_->dim());
        for (int a = 0; a < na; ++a) {
            if (c[static_cast<std::size_t>(a)] == 0.0) continue;
            const auto& ga = atom_eval_[static_cast<std::size_t>(a)].gradient.data;
            for (std::size_t i = 0; i < G.data.size(); ++i) G.data[i] += c[static_cast<std::size_t>(a)] * ga[i];
        }
        auto f_of = [&](const Field& grad) {
            double K = sys_->reg_weight_from_gradient(*g_, grad);
            double lin = 0.0;
            for (int a = 0; a < na; ++a) lin += c[static_cast<std::size_t>(a)] * L[static_cast<std::size_t>(a)];
            return (1.0 + tau * K) * dE + lin;
        };
        double fbest = f_of(G);
        Field trial = G;
        const double invphi = 0.6180339887498948482;
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (int a = 0; a < na; ++a) {
                const auto& ga = atom_eval_[static_cast<std::size_t>(a)].gradient.data;
                double c_old = c[static_cast<std::size_t>(a)];
                double lo = -10.0, hi = 10.0;
                auto eval_at = [&](double v) {
                    for (std::size_t i = 0; i < trial.data.size(); ++i)
                        trial.data[i] = G.data[i] + (v - c_old) * ga[i];
                    double save = c[static_cast<std::size_t>(a)];
                    c[static_cast<std::size_t>(a)] = v;
                    double fv = f_of(trial);
                    c[static_cast<std::size_t>(a)] = save;
                    return fv;
                };
                double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
                double f1 = eval_at(x1), f2 = eval_at(x2);
                for (int it = 0; it < 14; ++it) {
                    if (f1 >= f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - invphi * (hi - lo);
                        f1 = eval_at(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + invphi * (hi - lo);
                        f2 = eval_at(x2);
                    }
                }
                double cand = f1 >= f2 ? x1 : x2;
                double fcand = f1 >= f2 ? f1 : f2;
                if (fcand > fbest) {
                    for (std::size_t i = 0; i < G.data.size(); ++i) G.data[i] += (cand - c_old) * ga[i];
                    c[static_cast<std::size_t>(a)] = cand;
                    fbest = fcand;
                }
            }
        }
        return fbest;
    }

    const SystemSpec* sys_;
    const Grid* g_;
    Dictionary dict_;
    std::shared_ptr<const TestBasis> basis_;
    std::vector<TestEval> atom_eval_;
    std::vector<double> member_K_;
};

}  // namespace evs
