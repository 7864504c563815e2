#pragma once

// The constrained min-max time discretization: one implicit step minimizing
// the worst discrete-inequality residual subject to the energy constraint,
// per-step certification against a test dictionary, trajectory assembly, and
// piecewise-constant prolongations in time.
//
// The step solver is a two-stage deterministic method: a Newton-Krylov
// predictor drives the projected implicit-flux equation (whose solutions make
// every dictionary residual collapse to (1 + tau K) * (energy drop) <= 0) to
// roundoff, and a Polyak-type subgradient polish on the worst residual runs
// only if certification still fails. Feasibility is restored by bisection
// toward the previous state along the segment, which stays admissible by
// convexity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "evs/dictionary.hpp"
#include "evs/entropy.hpp"
#include "evs/errors.hpp"
#include "evs/grid.hpp"
#include "evs/summation.hpp"
#include "evs/system.hpp"
#include "evs/threading.hpp"

namespace evs {

struct StepConfig {
    double tau = 0.0;            // time step T/N
    int dict_modes = 2;          // dictionary mode bound
    double tol_step = 1e-8;      // absolute certificate tolerance (resolved)
    int max_outer = 5000;        // polish iteration cap
    double feas_tol = 1e-12;     // feasibility bisection tolerance
    bool warm_start = true;      // start the inner solve at U_prev
    int newton_max = 50;         // predictor Newton iterations
    int gmres_max = 80;          // Krylov dimension per Newton iteration
    double newton_tol = 1e-13;   // predictor residual tolerance (relative)
};

/// Resolve the run-level relative tolerance into the absolute per-step
/// certificate tolerance used everywhere downstream.
inline double resolve_tolerance(double rel_tol, double e0) { return rel_tol * (1.0 + e0); }

struct Trajectory {
    SystemTag sys = SystemTag::burgers;
    double T = 0.0;
    int nsteps = 0;
    StepConfig cfg;
    std::vector<Field> states;           // U^0 .. U^N
    std::vector<double> energy;          // E^n = E(U^n)
    std::vector<StepCertificate> certs;  // per step 1..N
    std::uint64_t fingerprint = 0;

    double time_at(int n) const { return (static_cast<double>(n) * T) / static_cast<double>(nsteps); }
};

/// Step failure carrying the best iterate and its certificate.
struct StepFailure : StepError {
    Field best;
    StepCertificate cert;
    StepFailure(const Field& b, const StepCertificate& c)
        : StepError("step certificate above tolerance", c.r_star, c.iterations), best(b), cert(c) {}
};

/// Discrete-inequality value for one test function:
/// (1 + tau K(Phi)) (E(U) - E(U_prev)) - <U - U_prev, Phi> + tau * integrate(F(U) : grad Phi).
inline double f_tau(const SystemSpec& sys, const Grid& g, const Field& U, const TestFunction& phi,
                    const Field& U_prev, double tau) {
    EnergyValue e = total_entropy(sys.entropy(), g, U);
    EnergyValue ep = total_entropy(sys.entropy(), g, U_prev);
    if (!e.finite || !ep.finite) throw ContractError("discrete inequality needs finite entropies");
    TestEval ev = eval_test(phi, g);
    double K = sys.reg_weight_from_gradient(g, ev.gradient);
    Field dU = U;
    for (std::size_t i = 0; i < dU.data.size(); ++i) dU.data[i] -= U_prev.data[i];
    double pair_du = inner(g, dU, ev.values);
    double pair_flux = sys.flux_pairing_with_eval(g, sys.flux_nodal(g, U), ev);
    return (1.0 + tau * K) * (e.value - ep.value) - pair_du + tau * pair_flux;
}

namespace detail {

inline double l2_norm(const Grid& g, const Field& f) { return std::sqrt(std::max(0.0, inner(g, f, f))); }

/// Projected implicit-equation residual G(U) = P(U - U_prev + tau div F(U)).
inline Field step_residual(const SystemSpec& sys, const Grid& g, const Field& U, const Field& U_prev, double tau) {
    Field G = sys.flux_divergence(g, U);
    for (std::size_t i = 0; i < G.data.size(); ++i) G.data[i] = U.data[i] - U_prev.data[i] + tau * G.data[i];
    sys.project_tangent(g, G);
    return G;
}

/// Directional derivative of the residual: w + tau P(div DF(U)[w]).
inline Field step_jacobian_apply(const SystemSpec& sys, const Grid& g, const Field& U, const Field& w, double tau) {
    const int m = sys.components(), d = sys.dim(), total = g.total();
    std::vector<double> dflux(static_cast<std::size_t>(total * m * d));
    for (int i = 0; i < total; ++i)
        sys.flux_derivative_point(
            std::span<const double>(U.data.data() + static_cast<std::ptrdiff_t>(i) * m, static_cast<std::size_t>(m)),
            std::span<const double>(w.data.data() + static_cast<std::ptrdiff_t>(i) * m, static_cast<std::size_t>(m)),
            std::span<double>(dflux.data() + static_cast<std::ptrdiff_t>(i) * m * d, static_cast<std::size_t>(m * d)));
    Field out = make_field(g, m);
    Field column = make_field(g, 1);
    for (int c = 0; c < m; ++c)
        for (int j = 0; j < d; ++j) {
            for (int i = 0; i < total; ++i) column.at(i, 0) = dflux[static_cast<std::size_t>(i * m * d + c * d + j)];
            Modes md = to_modes(g, column, 0);
            derivative_modes(g, md, j);
            Field der = make_field(g, 1);
            from_modes(g, std::move(md), der, 0);
            for (int i = 0; i < total; ++i) out.at(i, c) += der.at(i, 0);
        }
    sys.project_tangent(g, out);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = w.data[i] + tau * out.data[i];
    return out;
}

/// Deterministic GMRES (modified Gram-Schmidt + Givens rotations) for the
/// step Jacobian; returns the correction x with ||J x - b|| <= tol * ||b||.
inline Field gmres_solve(const SystemSpec& sys, const Grid& g, const Field& U, const Field& b, double tau,
                         double rel_tol, int max_dim, int& used) {
    const double beta = l2_norm(g, b);
    Field x = make_field(g, b.m);
    used = 0;
    if (beta == 0.0) return x;
    std::vector<Field> V;
    V.push_back(b);
    for (double& v : V[0].data) v /= beta;
    std::vector<std::vector<double>> H;  // H[j] holds column j (j+2 entries)
    std::vector<double> cs, sn;
    std::vector<double> gvec{beta};
    int dim = 0;
    for (int j = 0; j < max_dim; ++j) {
        Field w = step_jacobian_apply(sys, g, U, V[static_cast<std::size_t>(j)], tau);
        std::vector<double> hcol(static_cast<std::size_t>(j) + 2, 0.0);
        for (int i = 0; i <= j; ++i) {
            double hij = inner(g, w, V[static_cast<std::size_t>(i)]);
            hcol[static_cast<std::size_t>(i)] = hij;
            for (std::size_t k = 0; k < w.data.size(); ++k) w.data[k] -= hij * V[static_cast<std::size_t>(i)].data[k];
        }
        double hnext = l2_norm(g, w);
        hcol[static_cast<std::size_t>(j) + 1] = hnext;
        // apply existing rotations
        for (int i = 0; i < j; ++i) {
            double t = cs[static_cast<std::size_t>(i)] * hcol[static_cast<std::size_t>(i)] +
                       sn[static_cast<std::size_t>(i)] * hcol[static_cast<std::size_t>(i) + 1];
            hcol[static_cast<std::size_t>(i) + 1] = -sn[static_cast<std::size_t>(i)] * hcol[static_cast<std::size_t>(i)] +
                                                    cs[static_cast<std::size_t>(i)] * hcol[static_cast<std::size_t>(i) + 1];
            hcol[static_cast<std::size_t>(i)] = t;
        }
        double denom = std::hypot(hcol[static_cast<std::size_t>(j)], hnext);
        double c = 1.0, s = 0.0;
        if (denom > 0.0) {
            c = hcol[static_cast<std::size_t>(j)] / denom;
            s = hnext / denom;
        }
        cs.push_back(c);
        sn.push_back(s);
        hcol[static_cast<std::size_t>(j)] = denom;
        hcol[static_cast<std::size_t>(j) + 1] = 0.0;
        H.push_back(hcol);
        gvec.push_back(-s * gvec[static_cast<std::size_t>(j)]);
        gvec[static_cast<std::size_t>(j)] = c * gvec[static_cast<std::size_t>(j)];
        dim = j + 1;
        double resid = std::abs(gvec[static_cast<std::size_t>(j) + 1]);
        if (resid <= rel_tol * beta || hnext == 0.0) break;
        if (j + 1 < max_dim) {
            for (double& v : w.data) v /= hnext;
            V.push_back(std::move(w));
        }
    }
    // back substitution
    std::vector<double> y(static_cast<std::size_t>(dim), 0.0);
    for (int i = dim - 1; i >= 0; --i) {
        double s = gvec[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < dim; ++k) s -= H[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(k)];
        y[static_cast<std::size_t>(i)] = s / H[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    for (int k = 0; k < dim; ++k)
        for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y[static_cast<std::size_t>(k)] * V[static_cast<std::size_t>(k)].data[i];
    used = dim;
    return x;
}

/// Largest-step feasible point on the segment [U_prev, U] (energy at most
/// e_prev; the segment stays admissible by convexity of the constraint set).
inline Field restore_feasible(const SystemSpec& sys, const Grid& g, const Field& U_prev, double e_prev,
                              const Field& U, double feas_tol) {
    EnergyValue e = total_entropy(sys.entropy(), g, U);
    if (e.finite && e.value <= e_prev) return U;
    auto blend = [&](double th) {
        Field B = U_prev;
        for (std::size_t i = 0; i < B.data.size(); ++i)
            B.data[i] = U_prev.data[i] + th * (U.data[i] - U_prev.data[i]);
        return B;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100 && hi - lo > feas_tol; ++it) {
        double mid = 0.5 * (lo + hi);
        EnergyValue em = total_entropy(sys.entropy(), g, blend(mid));
        if (em.finite && em.value <= e_prev)
            lo = mid;
        else
            hi = mid;
    }
    return blend(lo);
}

struct PredictorResult {
    Field U;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Newton-Krylov solve of the projected implicit-flux equation.
inline PredictorResult predict(const SystemSpec& sys, const Grid& g, const Field& U_prev, double tau,
                               const StepConfig& cfg) {
    PredictorResult res;
    res.U = U_prev;
    if (!cfg.warm_start)
        for (double& v : res.U.data) v = 0.0;
    Field G = step_residual(sys, g, res.U, U_prev, tau);
    double gn = l2_norm(g, G);
    const double atol = cfg.newton_tol * (1.0 + l2_norm(g, U_prev));
    for (int it = 0; it < cfg.newton_max; ++it) {
        if (gn <= atol) break;
        Field rhs = G;
        for (double& v : rhs.data) v = -v;
        int used = 0;
        double forcing = std::min(1e-2, 0.5 * gn / (1.0 + gn));
        Field delta = gmres_solve(sys, g, res.U, rhs, tau, forcing, cfg.gmres_max, used);
        res.iterations += 1 + used;
        bool accepted = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
            Field trial = res.U;
            for (std::size_t i = 0; i < trial.data.size(); ++i) trial.data[i] += alpha * delta.data[i];
            sys.project_state(g, trial);
            Field Gt = step_residual(sys, g, trial, U_prev, tau);
            double gt = l2_norm(g, Gt);
            if (gt <= (1.0 - 1e-4 * alpha) * gn || gt <= atol) {
                res.U = std::move(trial);
                G = std::move(Gt);
                gn = gt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    res.residual_norm = gn;
    res.converged = gn <= atol;
    return res;
}

/// Subgradient polish on the worst dictionary residual (Polyak step toward
/// the certified level 0). Fallback stage; returns the best iterate found.
inline Field polish(const SystemSpec& sys, const Grid& g, const DictionaryTables& tables, const Field& U_prev,
                    double e_prev, Field U, double tau, const StepConfig& cfg, int& iters) {
    Field best = U;
    double best_r = tables.certify(U_prev, e_prev, U, tau, false).r_star;
    const int m = sys.components(), d = sys.dim(), total = g.total();
    for (int it = 0; it < cfg.max_outer; ++it) {
        StepCertificate cert = tables.certify(U_prev, e_prev, U, tau, false);
        if (cert.r_star < best_r) {
            best_r = cert.r_star;
            best = U;
        }
        if (cert.r_star <= 0.3 * cfg.tol_step) break;
        ++iters;
        int j = cert.worst_index;
        Field gfield = make_field(g, m);
        double K = tables.member_weight(j);
        double mult = 1.0 + tau * K;
        // (1 + tau K) D-eta(U) term
        std::vector<double> y(static_cast<std::size_t>(m));
        for (int i = 0; i < total; ++i) {
            for (int c = 0; c < m; ++c) y[static_cast<std::size_t>(c)] = U.at(i, c);
            auto de = d_eta(sys.entropy(), y);
            for (int c = 0; c < m; ++c) gfield.at(i, c) = mult * de[static_cast<std::size_t>(c)];
        }
        if (j > 0) {
            int atom = (j - 1) / 2;
            double sign = (j % 2 == 1) ? 1.0 : -1.0;
            const TestEval& ev = tables.atom_eval(atom);
            std::vector<double> G(static_cast<std::size_t>(m * d)), py(static_cast<std::size_t>(m));
            for (int i = 0; i < total; ++i) {
                for (int c = 0; c < m; ++c) {
                    y[static_cast<std::size_t>(c)] = U.at(i, c);
                    for (int ax = 0; ax < d; ++ax)
                        G[static_cast<std::size_t>(c * d + ax)] = sign * ev.gradient.at(i, c * d + ax);
                }
                sys.pairing_gradient_point(y, G, py);
                for (int c = 0; c < m; ++c)
                    gfield.at(i, c) += -sign * ev.values.at(i, c) + tau * py[static_cast<std::size_t>(c)];
            }
        }
        sys.project_tangent(g, gfield);
        double gg = inner(g, gfield, gfield);
        if (gg <= 0.0) break;
        double lambda = cert.r_star / gg;
        for (std::size_t i = 0; i < U.data.size(); ++i) U.data[i] -= lambda * gfield.data[i];
        sys.project_state(g, U);
        U = restore_feasible(sys, g, U_prev, e_prev, U, cfg.feas_tol);
    }
    return best;
}

}  // namespace detail

/// One implicit step from U_prev with certification. Returns the accepted
/// state and its certificate; throws StepFailure when the certificate cannot
/// be brought under tolerance.
inline std::pair<Field, StepCertificate> step(const SystemSpec& sys, const Grid& g, const DictionaryTables& tables,
                                              const Field& U_prev, double e_prev, const StepConfig& cfg) {
    if (cfg.tau <= 0.0 || cfg.tol_step <= 0.0) throw ConfigError("step needs tau > 0 and tol_step > 0");
    EnergyValue ep = total_entropy(sys.entropy(), g, U_prev);
    if (!ep.finite) throw ContractError("previous state has infinite entropy");

    detail::PredictorResult pred = detail::predict(sys, g, U_prev, cfg.tau, cfg);
    Field U = detail::restore_feasible(sys, g, U_prev, e_prev, pred.U, cfg.feas_tol);
    StepCertificate cert = tables.certify(U_prev, e_prev, U, cfg.tau, true);
    cert.iterations = pred.iterations;

    if (cert.r_star > cfg.tol_step) {
        int polish_iters = 0;
        Field polished = detail::polish(sys, g, tables, U_prev, e_prev, U, cfg.tau, cfg, polish_iters);
        polished = detail::restore_feasible(sys, g, U_prev, e_prev, polished, cfg.feas_tol);
        StepCertificate cert2 = tables.certify(U_prev, e_prev, polished, cfg.tau, true);
        cert2.iterations = pred.iterations + polish_iters;
        if (cert2.r_star <= cert.r_star) {
            U = std::move(polished);
            cert = cert2;
        }
    }
    if (cert.r_star > cfg.tol_step) throw StepFailure(U, cert);
    return {std::move(U), cert};
}

/// Iterate the step N times from a constraint-projected initial state.
inline Trajectory run(const SystemSpec& sys, const Grid& g, const DictionaryTables& tables, const Field& U0,
                      double T, int N, const StepConfig& cfg) {
    if (N < 1 || T <= 0.0) throw ConfigError("run needs N >= 1 and T > 0");
    Trajectory traj;
    traj.sys = sys.tag();
    traj.T = T;
    traj.nsteps = N;
    traj.cfg = cfg;
    Field U = U0;
    sys.project_state(g, U);
    EnergyValue e0 = total_entropy(sys.entropy(), g, U);
    if (!e0.finite) throw ContractError("initial state has infinite entropy");
    traj.states.push_back(U);
    traj.energy.push_back(e0.value);
    for (int n = 1; n <= N; ++n) {
        auto [next, cert] = step(sys, g, tables, traj.states.back(), traj.energy.back(), cfg);
        traj.states.push_back(std::move(next));
        traj.energy.push_back(cert.e_next);
        traj.certs.push_back(cert);
    }
    return traj;
}

struct ProlongedPair {
    const Field* U;      // piecewise-constant state prolongation
    double e_at;         // right-continuous auxiliary energy
    double e_before;     // left-limit auxiliary energy
};

/// Piecewise-constant prolongations: on (t^{n-1}, t^n] the state and the
/// right-continuous energy take their step-n values while the left-limit
/// energy holds E^{n-1}; t = 0 returns the initial pair.
inline ProlongedPair prolongate(const Trajectory& traj, double t) {
    if (t < 0.0 || t > traj.T * (1.0 + 1e-12)) throw ContractError("prolongation time outside [0, T]");
    if (t <= 0.0) return {&traj.states[0], traj.energy[0], traj.energy[0]};
    double ratio = t / traj.T * static_cast<double>(traj.nsteps);
    int n = static_cast<int>(std::ceil(ratio - 1e-12));
    n = std::clamp(n, 1, traj.nsteps);
    return {&traj.states[static_cast<std::size_t>(n)], traj.energy[static_cast<std::size_t>(n)],
            traj.energy[static_cast<std::size_t>(n) - 1]};
}

}  // namespace evs
