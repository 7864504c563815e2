#pragma once

// Certified-inequality diagnostics along discrete paths: window residuals of
// the integrated energy-variational inequality, relative entropy and relative
// form against smooth reference states, the Gronwall comparison with a strong
// solution, and the convexity probe over blended trajectory pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "evs/dictionary.hpp"
#include "evs/entropy.hpp"
#include "evs/errors.hpp"
#include "evs/grid.hpp"
#include "evs/oracles.hpp"
#include "evs/stepper.hpp"
#include "evs/summation.hpp"
#include "evs/system.hpp"
#include "evs/testfunction.hpp"
#include "evs/threading.hpp"

namespace evs {

// ---------------------------------------------------------------------------
// Solution pairs (state path, auxiliary energy path)

/// A discrete pair path: states U^0..U^N with an auxiliary energy sequence
/// E^0..E^N that majorizes the state entropy (E^n >= E(U^n)). Trajectories
/// from the stepper have E^n = E(U^n); blended pairs keep the convex
/// combination of the parents' energies, which strictly majorizes.
struct PairPath {
    double T = 0.0;
    int nsteps = 0;
    double tau = 0.0;
    std::vector<Field> states;
    std::vector<double> energy;

    double time_at(int n) const { return (static_cast<double>(n) * T) / static_cast<double>(nsteps); }
};

inline PairPath as_pair_path(const Trajectory& traj) {
    PairPath p;
    p.T = traj.T;
    p.nsteps = traj.nsteps;
    p.tau = traj.T / static_cast<double>(traj.nsteps);
    p.states = traj.states;
    p.energy = traj.energy;
    return p;
}

/// Wrap a smooth reference trajectory as a pair path with E = E(state).
inline PairPath as_pair_path(const SystemSpec& sys, const Grid& g, const OracleTrajectory& o) {
    if (o.states.size() < 2) throw ContractError("reference trajectory has no steps");
    PairPath p;
    p.T = o.T;
    p.nsteps = static_cast<int>(o.states.size()) - 1;
    p.tau = o.T / static_cast<double>(p.nsteps);
    p.states = o.states;
    for (const Field& U : o.states) {
        EnergyValue e = total_entropy(sys.entropy(), g, U);
        if (!e.finite) throw ContractError("reference state has infinite entropy");
        p.energy.push_back(e.value);
    }
    return p;
}

/// Convex combination of two pair paths sharing shape and time structure.
inline PairPath blend_paths(const PairPath& a, const PairPath& b, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw ContractError("blend weight outside [0,1]");
    if (a.nsteps != b.nsteps || std::abs(a.T - b.T) > 1e-12 * (1.0 + std::abs(a.T)))
        throw ContractError("blended paths must share the time grid");
    PairPath out;
    out.T = a.T;
    out.nsteps = a.nsteps;
    out.tau = a.tau;
    out.energy.resize(a.energy.size());
    for (std::size_t n = 0; n < a.energy.size(); ++n)
        out.energy[n] = lambda * a.energy[n] + (1.0 - lambda) * b.energy[n];
    out.states.reserve(a.states.size());
    for (std::size_t n = 0; n < a.states.size(); ++n) {
        require_same_shape(a.states[n], b.states[n]);
        Field f = a.states[n];
        for (std::size_t i = 0; i < f.data.size(); ++i)
            f.data[i] = lambda * f.data[i] + (1.0 - lambda) * b.states[n].data[i];
        out.states.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Window residuals of the integrated inequality
//
// For a window (t^a, t^b] and test function Phi the residual is
//   [E - <U,Phi>]_a^b + sum_{n=a+1}^{b} ( <U^n, Phi^n - Phi^{n-1}>
//       + tau * flux_pairing(U^n, Phi mid)
//       + tau * K(Phi^{n-1}) * (E(U^n) - E^{n-1}) ).
// The state is piecewise constant in time (right-continuous), the auxiliary
// energy piecewise constant (left value on each step), and Phi piecewise
// linear, so the time-derivative and flux terms integrate exactly; the
// regularity weight uses the left sample of each segment.

/// Per-step scalar tables over the dictionary atoms, enabling exact window
/// residual evaluation for every signed member and every scaling of it.
struct ResidualTables {
    int nsteps = 0;
    double tau = 0.0;
    int atoms = 0;
    std::vector<double> e_aux;             // auxiliary energy E^n
    std::vector<double> e_state;           // recomputed state entropy E(U^n)
    std::vector<double> inner_atom;        // [n * atoms + a] = <U^n, atom_a>
    std::vector<double> flux_atom;         // [n * atoms + a] = flux pairing at U^n
    const DictionaryTables* dict = nullptr;

    double energy_part(int first, int last) const { return e_aux[static_cast<std::size_t>(last)] - e_aux[static_cast<std::size_t>(first)]; }

    /// Phi-linear part of the window residual for one signed member
    /// (member 0 is the zero test function).
    double linear_part(int first, int last, int member) const {
        if (member == 0) return 0.0;
        const int a = (member - 1) / 2;
        const double sign = (member % 2 == 1) ? 1.0 : -1.0;
        const double K = dict->member_weight(member);
        StableSum s;
        s.add(-sign * inner_atom[static_cast<std::size_t>(last * atoms + a)]);
        s.add(sign * inner_atom[static_cast<std::size_t>(first * atoms + a)]);
        for (int n = first + 1; n <= last; ++n) {
            s.add(tau * sign * flux_atom[static_cast<std::size_t>(n * atoms + a)]);
            s.add(tau * K * (e_state[static_cast<std::size_t>(n)] - e_aux[static_cast<std::size_t>(n - 1)]));
        }
        return s.value();
    }

    /// Window residual with the member's test function scaled by `scale`.
    double residual(int first, int last, int member, double scale = 1.0) const {
        if (first < 0 || last > nsteps || first > last) throw ContractError("window outside the trajectory");
        return energy_part(first, last) + scale * linear_part(first, last, member);
    }
};

inline ResidualTables build_residual_tables(const SystemSpec& sys, const Grid& g, const DictionaryTables& dict,
                                            const PairPath& path) {
    ResidualTables rt;
    rt.nsteps = path.nsteps;
    rt.tau = path.tau;
    rt.atoms = dict.atom_count();
    rt.dict = &dict;
    rt.e_aux = path.energy;
    const std::size_t total = static_cast<std::size_t>(g.total());
    rt.e_state.resize(path.states.size());
    rt.inner_atom.assign(path.states.size() * static_cast<std::size_t>(rt.atoms), 0.0);
    rt.flux_atom.assign(path.states.size() * static_cast<std::size_t>(rt.atoms), 0.0);
    for (std::size_t n = 0; n < path.states.size(); ++n) {
        const Field& U = path.states[n];
        require_matches(g, U);
        EnergyValue e = total_entropy(sys.entropy(), g, U);
        if (!e.finite) throw ContractError("path state has infinite entropy");
        rt.e_state[n] = e.value;
        std::vector<double> flux_buf = sys.flux_nodal(g, U);
        // each index owns two disjoint table slots, so the result is
        // independent of the worker count
        parallel_for(rt.atoms, [&](int a) {
            const TestEval& ev = dict.atom_eval(a);
            rt.inner_atom[n * static_cast<std::size_t>(rt.atoms) + static_cast<std::size_t>(a)] =
                stable_dot(U.data, ev.values.data) / static_cast<double>(total);
            rt.flux_atom[n * static_cast<std::size_t>(rt.atoms) + static_cast<std::size_t>(a)] =
                stable_dot(flux_buf, ev.gradient.data) / static_cast<double>(total);
        });
    }
    return rt;
}

/// Window residual for an explicit test-function path: one entry (constant in
/// time) or nsteps+1 samples (piecewise linear in time).
inline double envar_residual(const SystemSpec& sys, const Grid& g, const PairPath& path,
                             const std::vector<TestFunction>& phis, int first, int last) {
    if (first < 0 || last > path.nsteps || first > last) throw ContractError("window outside the trajectory");
    if (phis.empty() || (phis.size() != 1 && phis.size() != static_cast<std::size_t>(path.nsteps) + 1))
        throw ContractError("test path needs one sample or one per step boundary");
    if (first == last) return 0.0;
    const bool constant = phis.size() == 1;

    std::vector<std::optional<TestEval>> evals(constant ? 1 : phis.size());
    std::shared_ptr<const TestBasis> shared;
    auto ev_at = [&](int n) -> const TestEval& {
        std::size_t idx = constant ? 0 : static_cast<std::size_t>(n);
        if (!evals[idx]) {
            TestFunction phi = phis[idx];
            bind_basis(phi, g, shared);
            shared = phi.basis;
            evals[idx] = eval_test(phi, g);
        }
        return *evals[idx];
    };

    auto state_entropy = [&](int n) {
        EnergyValue e = total_entropy(sys.entropy(), g, path.states[static_cast<std::size_t>(n)]);
        if (!e.finite) throw ContractError("path state has infinite entropy");
        return e.value;
    };

    StableSum r;
    r.add(path.energy[static_cast<std::size_t>(last)] -
          inner(g, path.states[static_cast<std::size_t>(last)], ev_at(last).values));
    r.add(-(path.energy[static_cast<std::size_t>(first)] -
            inner(g, path.states[static_cast<std::size_t>(first)], ev_at(first).values)));
    Field grad_mid = make_field(g, ev_at(first).gradient.m);
    for (int n = first + 1; n <= last; ++n) {
        const Field& U = path.states[static_cast<std::size_t>(n)];
        const TestEval& left = ev_at(n - 1);
        const TestEval& right = ev_at(n);
        if (!constant) {
            Field dphi = right.values;
            for (std::size_t i = 0; i < dphi.data.size(); ++i) dphi.data[i] -= left.values.data[i];
            r.add(inner(g, U, dphi));
        }
        double flux;
        if (constant) {
            flux = sys.flux_pairing_with_eval(g, sys.flux_nodal(g, U), right);
        } else {
            for (std::size_t i = 0; i < grad_mid.data.size(); ++i)
                grad_mid.data[i] = 0.5 * (left.gradient.data[i] + right.gradient.data[i]);
            TestEval mid{right.values, grad_mid};
            flux = sys.flux_pairing_with_eval(g, sys.flux_nodal(g, U), mid);
        }
        double K = sys.reg_weight_from_gradient(g, left.gradient);
        r.add(path.tau * flux);
        r.add(path.tau * K * (state_entropy(n) - path.energy[static_cast<std::size_t>(n - 1)]));
    }
    return r.value();
}

// ---------------------------------------------------------------------------
// Window battery

/// Step indices of the window battery: a `segments`-interval decimation of
/// 0..nsteps (all indices when nsteps <= segments).
inline std::vector<int> battery_points(int nsteps, int segments = 16) {
    if (segments < 1) throw ContractError("battery needs at least one segment");
    std::vector<int> pts;
    if (nsteps <= segments) {
        for (int i = 0; i <= nsteps; ++i) pts.push_back(i);
        return pts;
    }
    for (int i = 0; i <= segments; ++i) {
        int p = static_cast<int>((static_cast<long long>(i) * nsteps) / segments);
        if (pts.empty() || pts.back() != p) pts.push_back(p);
    }
    return pts;
}

struct ResidualEntry {
    int first = 0;        // window start step index
    int last = 0;         // window end step index
    int member = 0;       // dictionary member id
    double value = 0.0;   // window residual
    double budget = 0.0;  // accumulated certificate bound for the window
};

struct ResidualReport {
    std::vector<ResidualEntry> entries;
    double max_value = -std::numeric_limits<double>::infinity();
    double max_excess = -std::numeric_limits<double>::infinity();  // max(value - budget)
    double tolerance = 0.0;                                        // slack floor used in budgets
};

/// Evaluate every battery window against every dictionary member. The budget
/// of a window is the sum of the per-step slacks it covers plus a fixed
/// rounding floor; `slack[n]` is the certified bound for step n (index 0
/// unused).
inline ResidualReport residual_battery(const ResidualTables& rt, const std::vector<double>& slack,
                                       double scale, int segments = 16) {
    if (static_cast<int>(slack.size()) != rt.nsteps + 1) throw ContractError("need one slack entry per step");
    ResidualReport rep;
    rep.tolerance = 1e-9 * scale;
    const std::vector<int> pts = battery_points(rt.nsteps, segments);
    const int members = rt.dict->member_count();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const int a = pts[i], b = pts[j];
            double budget = rep.tolerance;
            for (int n = a + 1; n <= b; ++n) budget += std::max(slack[static_cast<std::size_t>(n)], 0.0);
            for (int m = 0; m < members; ++m) {
                ResidualEntry e{a, b, m, rt.residual(a, b, m), budget};
                rep.entries.push_back(e);
                rep.max_value = std::max(rep.max_value, e.value);
                rep.max_excess = std::max(rep.max_excess, e.value - e.budget);
            }
        }
    return rep;
}

/// Battery report of a trajectory against its own per-step certificates.
inline ResidualReport trajectory_report(const SystemSpec& sys, const Grid& g, const DictionaryTables& dict,
                                        const Trajectory& traj, int segments = 16) {
    PairPath path = as_pair_path(traj);
    ResidualTables rt = build_residual_tables(sys, g, dict, path);
    std::vector<double> slack(static_cast<std::size_t>(path.nsteps) + 1, 0.0);
    for (int n = 1; n <= path.nsteps; ++n)
        slack[static_cast<std::size_t>(n)] = std::max(traj.certs[static_cast<std::size_t>(n - 1)].r_star, 0.0);
    return residual_battery(rt, slack, 1.0 + path.energy[0], segments);
}

/// Convexity probe: blend two trajectories with shared initial data and
/// evaluate the battery against the blended certificate budget.
inline ResidualReport solution_set_probe(const SystemSpec& sys, const Grid& g, const DictionaryTables& dict,
                                         const Trajectory& t1, const Trajectory& t2, double lambda,
                                         int segments = 16) {
    if (t1.nsteps != t2.nsteps || std::abs(t1.T - t2.T) > 1e-12 * (1.0 + std::abs(t1.T)))
        throw ContractError("probe trajectories must share the time grid");
    require_same_shape(t1.states[0], t2.states[0]);
    for (std::size_t i = 0; i < t1.states[0].data.size(); ++i)
        if (t1.states[0].data[i] != t2.states[0].data[i])
            throw ContractError("probe trajectories must share the initial state");
    PairPath blended = blend_paths(as_pair_path(t1), as_pair_path(t2), lambda);
    ResidualTables rt = build_residual_tables(sys, g, dict, blended);
    std::vector<double> slack(static_cast<std::size_t>(blended.nsteps) + 1, 0.0);
    for (int n = 1; n <= blended.nsteps; ++n)
        slack[static_cast<std::size_t>(n)] = lambda * std::max(t1.certs[static_cast<std::size_t>(n - 1)].r_star, 0.0) +
                                             (1.0 - lambda) * std::max(t2.certs[static_cast<std::size_t>(n - 1)].r_star, 0.0);
    return residual_battery(rt, slack, 1.0 + blended.energy[0], segments);
}

// ---------------------------------------------------------------------------
// Relative entropy and relative form

namespace detail_diag {

inline void require_interior(const SystemSpec& sys, const Grid& g, const Field& Ut) {
    if (sys.tag() != SystemTag::compressible) return;
    const int m = sys.components();
    for (int i = 0; i < g.total(); ++i)
        if (Ut.data[static_cast<std::size_t>(i) * static_cast<std::size_t>(m)] < 1e-6)
            throw ContractError("reference density below the interior floor");
}

/// Nodal field of the entropy gradient of a reference state.
inline Field d_eta_field(const EntropyPair& pair, const Grid& g, const Field& Ut) {
    const int m = pair.components();
    Field out = make_field(g, m);
    std::vector<double> y(static_cast<std::size_t>(m));
    for (int i = 0; i < g.total(); ++i) {
        for (int c = 0; c < m; ++c) y[static_cast<std::size_t>(c)] = Ut.at(i, c);
        std::vector<double> de = d_eta(pair, y);
        for (int c = 0; c < m; ++c) out.at(i, c) = de[static_cast<std::size_t>(c)];
    }
    return out;
}

/// Spectral gradient with the test-eval layout (component*d + axis).
inline Field gradient_field(const Grid& g, const Field& f) {
    const int d = g.dim(), m = f.m;
    Field out = make_field(g, m * d);
    for (int c = 0; c < m; ++c)
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> der = derivative_component(g, f, c, axis);
            for (int i = 0; i < g.total(); ++i) out.at(i, c * d + axis) = der[static_cast<std::size_t>(i)];
        }
    return out;
}

/// Hessian of the entropy at an interior point applied to a direction.
inline void d2_eta_apply(const EntropyPair& pair, std::span<const double> y, std::span<const double> w,
                         std::span<double> out) {
    const int m = pair.components();
    if (pair.quadratic()) {
        for (int c = 0; c < m; ++c) out[static_cast<std::size_t>(c)] = pair.quad_weight(c) * w[static_cast<std::size_t>(c)];
        return;
    }
    const int d = m - 1;
    const double h = y[0];
    if (h <= 0.0) throw ContractError("entropy Hessian needs positive density");
    double m2 = 0.0, mdotw = 0.0;
    for (int j = 0; j < d; ++j) {
        m2 += y[static_cast<std::size_t>(1 + j)] * y[static_cast<std::size_t>(1 + j)];
        mdotw += y[static_cast<std::size_t>(1 + j)] * w[static_cast<std::size_t>(1 + j)];
    }
    // P'' = p'(h)/h for the pressure potential
    const double pdd = pair.pressure_slope(h) / h;
    out[0] = (m2 / (h * h * h) + pdd) * w[0] - mdotw / (h * h);
    for (int j = 0; j < d; ++j)
        out[static_cast<std::size_t>(1 + j)] =
            -y[static_cast<std::size_t>(1 + j)] / (h * h) * w[0] + w[static_cast<std::size_t>(1 + j)] / h;
}

}  // namespace detail_diag

/// Relative total entropy R(U|Ut) = E(U) - E(Ut) - <DE(Ut), U - Ut>.
/// Quadratic systems reduce to E(U - Ut); the compressible form is the
/// nodal sum of h/2 |m/h - mt/ht|^2 + P(h) - P(ht) - P'(ht)(h - ht).
inline double relative_entropy(const SystemSpec& sys, const Grid& g, const Field& U, const Field& Ut) {
    require_matches(g, U);
    require_same_shape(U, Ut);
    const EntropyPair& pair = sys.entropy();
    detail_diag::require_interior(sys, g, Ut);
    if (pair.quadratic()) {
        Field diff = U;
        for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= Ut.data[i];
        EnergyValue e = total_entropy(pair, g, diff);
        if (!e.finite) throw ContractError("relative entropy is infinite");
        return e.value;
    }
    const int m = sys.components(), d = m - 1;
    StableSum s;
    for (int i = 0; i < g.total(); ++i) {
        const double h = U.at(i, 0), ht = Ut.at(i, 0);
        if (h > 0.0) {
            double v2 = 0.0;
            for (int j = 0; j < d; ++j) {
                double dv = U.at(i, 1 + j) / h - Ut.at(i, 1 + j) / ht;
                v2 += dv * dv;
            }
            s.add(0.5 * h * v2);
        }
        s.add(pair.potential(std::max(h, 0.0)) - pair.potential(ht) - pair.potential_slope(ht) * (h - ht));
    }
    return s.value() / static_cast<double>(g.total());
}

/// Relative form W(U|Ut): the flux Taylor remainder paired with the gradient
/// of the reference entropy variable, plus K(D eta(Ut)) times the relative
/// entropy. Nonnegative (to rounding) for admissible states.
inline double relative_form(const SystemSpec& sys, const Grid& g, const Field& U, const Field& Ut) {
    const double R = relative_entropy(sys, g, U, Ut);
    const EntropyPair& pair = sys.entropy();
    Field dut = detail_diag::d_eta_field(pair, g, Ut);
    Field grad = detail_diag::gradient_field(g, dut);
    const double K = sys.reg_weight_from_gradient(g, grad);
    const int m = sys.components(), d = g.dim();
    std::vector<double> fu(static_cast<std::size_t>(m * d)), fut(static_cast<std::size_t>(m * d)),
        dfu(static_cast<std::size_t>(m * d)), yu(static_cast<std::size_t>(m)), yt(static_cast<std::size_t>(m)),
        dy(static_cast<std::size_t>(m));
    StableSum s;
    for (int i = 0; i < g.total(); ++i) {
        for (int c = 0; c < m; ++c) {
            yu[static_cast<std::size_t>(c)] = U.at(i, c);
            yt[static_cast<std::size_t>(c)] = Ut.at(i, c);
            dy[static_cast<std::size_t>(c)] = yu[static_cast<std::size_t>(c)] - yt[static_cast<std::size_t>(c)];
        }
        sys.flux_point(yu, fu);
        sys.flux_point(yt, fut);
        sys.flux_derivative_point(yt, dy, dfu);
        for (int c = 0; c < m; ++c)
            for (int j = 0; j < d; ++j) {
                std::size_t k = static_cast<std::size_t>(c * d + j);
                s.add(grad.at(i, c * d + j) * (fu[k] - fut[k] - dfu[k]));
            }
    }
    return s.value() / static_cast<double>(g.total()) + K * R;
}

// ---------------------------------------------------------------------------
// Relative entropy inequality residual against a smooth reference path

/// Window residual of the relative entropy inequality:
///   [R + gap]_a^b - sum tau * ( -W^n + <A(Ut^n), D2eta(Ut^n)(U^n - Ut^n)>
///                               + K^{n-1} (R^{n-1} + gap^{n-1}) )
/// with gap^n = E^n - E(U^n), A(Ut) = dt Ut + P div F(Ut) (tangent-projected
/// strong residual, central time differences on the reference samples), the
/// dissipative terms at the right state of each step and the Gronwall term at
/// the left. Nonpositive up to scheme slack for stepper trajectories.
inline double relent_residual(const SystemSpec& sys, const Grid& g, const Trajectory& traj,
                              const OracleTrajectory& oracle, int first, int last) {
    if (first < 0 || last > traj.nsteps || first > last) throw ContractError("window outside the trajectory");
    if (first == last) return 0.0;
    const double tau = traj.T / static_cast<double>(traj.nsteps);
    const EntropyPair& pair = sys.entropy();
    const int m = sys.components();

    auto ref_at = [&](int n) -> const Field& { return oracle.sample(traj.time_at(n)); };

    std::vector<double> R(static_cast<std::size_t>(last - first) + 1);
    std::vector<double> gap(R.size()), Kw(R.size());
    for (int n = first; n <= last; ++n) {
        const Field& Ut = ref_at(n);
        const Field& U = traj.states[static_cast<std::size_t>(n)];
        std::size_t idx = static_cast<std::size_t>(n - first);
        R[idx] = relative_entropy(sys, g, U, Ut);
        EnergyValue e = total_entropy(pair, g, U);
        if (!e.finite) throw ContractError("trajectory state has infinite entropy");
        gap[idx] = traj.energy[static_cast<std::size_t>(n)] - e.value;
        Field grad = detail_diag::gradient_field(g, detail_diag::d_eta_field(pair, g, Ut));
        Kw[idx] = sys.reg_weight_from_gradient(g, grad);
    }

    StableSum s;
    s.add(R[static_cast<std::size_t>(last - first)] + gap[static_cast<std::size_t>(last - first)]);
    s.add(-(R[0] + gap[0]));
    std::vector<double> yt(static_cast<std::size_t>(m)), dy(static_cast<std::size_t>(m)), hd(static_cast<std::size_t>(m));
    for (int n = first + 1; n <= last; ++n) {
        std::size_t idx = static_cast<std::size_t>(n - first);
        const Field& Ut = ref_at(n);
        const Field& U = traj.states[static_cast<std::size_t>(n)];
        const double W = relative_form(sys, g, U, Ut);

        // strong-equation residual of the reference at t^n
        Field A = sys.flux_divergence(g, Ut);
        sys.project_tangent(g, A);
        const Field& prev = (n >= 1) ? ref_at(n - 1) : Ut;
        const Field& next = (n < traj.nsteps) ? ref_at(n + 1) : Ut;
        const double denom = (n >= 1 && n < traj.nsteps) ? 2.0 * tau : tau;
        for (std::size_t i = 0; i < A.data.size(); ++i) A.data[i] += (next.data[i] - prev.data[i]) / denom;

        StableSum apair;
        for (int i = 0; i < g.total(); ++i) {
            for (int c = 0; c < m; ++c) {
                yt[static_cast<std::size_t>(c)] = Ut.at(i, c);
                dy[static_cast<std::size_t>(c)] = U.at(i, c) - yt[static_cast<std::size_t>(c)];
            }
            detail_diag::d2_eta_apply(pair, yt, dy, hd);
            for (int c = 0; c < m; ++c) apair.add(A.at(i, c) * hd[static_cast<std::size_t>(c)]);
        }
        const double pairing = apair.value() / static_cast<double>(g.total());
        s.add(-tau * (-W + pairing + Kw[idx - 1] * (R[idx - 1] + gap[idx - 1])));
    }
    return s.value();
}

// ---------------------------------------------------------------------------
// Weak-strong comparison

struct RelativeEntropyTrace {
    std::vector<double> times;
    std::vector<double> R;      // relative entropy at each sample
    std::vector<double> W;      // relative form at each sample
    std::vector<double> gap;    // E^n - E(U^n)
    std::vector<double> slack;  // accumulated certificate slack + rounding floor
    std::vector<double> bound;  // (R0 + gap0) exp(Ktilde t) + slack
    double ktilde = 0.0;        // sup over samples of K(D eta(Ut))
    double scale = 1.0;
    bool bound_satisfied = false;
};

/// Gronwall comparison of a certified trajectory with a strong solution:
/// checks R(t^n) + gap(t^n) <= (R(0) + gap(0)) exp(Ktilde t^n) + slack(t^n)
/// where slack accumulates the positive parts of the step certificates plus
/// a per-step rounding floor of 1e-12 * (1 + E^0).
inline RelativeEntropyTrace weak_strong_report(const SystemSpec& sys, const Grid& g, const Trajectory& traj,
                                               const OracleTrajectory& oracle) {
    RelativeEntropyTrace tr;
    tr.scale = 1.0 + traj.energy[0];
    const EntropyPair& pair = sys.entropy();
    const int N = traj.nsteps;
    tr.times.resize(static_cast<std::size_t>(N) + 1);
    tr.R.resize(tr.times.size());
    tr.W.resize(tr.times.size());
    tr.gap.resize(tr.times.size());
    tr.slack.resize(tr.times.size());
    tr.bound.resize(tr.times.size());
    for (int n = 0; n <= N; ++n) {
        const double t = traj.time_at(n);
        const Field& Ut = oracle.sample(t);
        require_same_shape(traj.states[static_cast<std::size_t>(n)], Ut);
        const Field& U = traj.states[static_cast<std::size_t>(n)];
        std::size_t idx = static_cast<std::size_t>(n);
        tr.times[idx] = t;
        tr.R[idx] = relative_entropy(sys, g, U, Ut);
        tr.W[idx] = relative_form(sys, g, U, Ut);
        EnergyValue e = total_entropy(pair, g, U);
        if (!e.finite) throw ContractError("trajectory state has infinite entropy");
        tr.gap[idx] = traj.energy[idx] - e.value;
        Field grad = detail_diag::gradient_field(g, detail_diag::d_eta_field(pair, g, Ut));
        tr.ktilde = std::max(tr.ktilde, sys.reg_weight_from_gradient(g, grad));
    }
    double acc = 0.0;
    const double floor_per_step = 1e-12 * tr.scale;
    tr.bound_satisfied = true;
    for (int n = 0; n <= N; ++n) {
        std::size_t idx = static_cast<std::size_t>(n);
        if (n > 0) acc += std::max(traj.certs[idx - 1].r_star, 0.0) + floor_per_step;
        tr.slack[idx] = acc;
        tr.bound[idx] = (tr.R[0] + tr.gap[0]) * std::exp(tr.ktilde * tr.times[idx]) + acc;
        if (tr.R[idx] + tr.gap[idx] > tr.bound[idx]) tr.bound_satisfied = false;
    }
    return tr;
}

}  // namespace evs
