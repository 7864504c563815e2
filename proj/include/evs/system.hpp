#pragma once

// Concrete system definitions: flux evaluators, regularity weights over test
// functions, admissible-set projectors, and the hypothesis probes (flux
// bound, entropy-flux identity, convexity of the augmented pairing).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evs/entropy.hpp"
#include "evs/grid.hpp"
#include "evs/tensor.hpp"
#include "evs/testfunction.hpp"

namespace evs {

/// Largest mode kept by the admissible-set projector of the quadratic
/// systems: three-fold products of band-limited fields stay below the
/// quadrature-exactness threshold.
inline int cubic_exact_cutoff(const Grid& g) {
    int c = (g.nx() - 1) / 3;
    if (g.dim() == 2) c = std::min(c, (g.ny() - 1) / 3);
    return c;
}

struct FluxIdentityReport {
    double value = 0.0;
    double refinement_error = 0.0;  // |value - value on a once-refined grid|
};

struct ConvexityReport {
    double slack = 0.0;  // Jensen defect of the augmented pairing
    double j_mid = 0.0;  // augmented pairing at the blended state
};

class SystemSpec {
  public:
    SystemSpec(SystemTag sys, int d, double a = 1.0, double gamma = 1.4, double mu = 1.0)
        : sys_(sys), d_(d), pair_(sys, d, a, gamma, mu) {
        switch (sys) {
            case SystemTag::burgers:
                if (d != 1) throw ConfigError("scalar convection is one-dimensional");
                name_ = "burgers";
                break;
            case SystemTag::euler:
                if (d != 2) throw ConfigError("incompressible flow needs a 2D torus");
                name_ = "euler";
                break;
            case SystemTag::mhd:
                if (d != 2) throw ConfigError("magnetohydrodynamics needs a 2D torus");
                name_ = "mhd";
                break;
            case SystemTag::compressible:
                if (d != 1 && d != 2) throw ConfigError("compressible flow supports d = 1 or 2");
                name_ = "compressible";
                break;
        }
    }

    const std::string& name() const { return name_; }
    SystemTag tag() const { return sys_; }
    int dim() const { return d_; }
    int components() const { return pair_.components(); }
    const EntropyPair& entropy() const { return pair_; }

    /// Linear-growth constant C with |F(y)|_2 <= C (eta(y) + 1) on dom eta.
    double flux_bound_constant() const {
        switch (sys_) {
            case SystemTag::burgers: return 1.0;
            case SystemTag::euler: return 2.0;
            case SystemTag::mhd: return 2.0 + 2.0 / std::sqrt(pair_.mu());
            case SystemTag::compressible: {
                double a = pair_.a(), gamma = pair_.gamma();
                return 3.0 + (gamma - 1.0) * (std::sqrt(static_cast<double>(d_)) + 0.5 / a);
            }
        }
        throw ContractError("unknown system tag");
    }

    /// Pointwise flux F(y) into out[c*d + j].
    void flux_point(std::span<const double> y, std::span<double> out) const {
        const int m = components(), d = d_;
        if (static_cast<int>(y.size()) != m || static_cast<int>(out.size()) != m * d)
            throw ContractError("flux arity mismatch");
        for (double v : y)
            if (!std::isfinite(v)) throw DomainError("non-finite flux argument");
        switch (sys_) {
            case SystemTag::burgers:
                out[0] = 0.5 * y[0] * y[0];
                return;
            case SystemTag::euler:
                for (int c = 0; c < d; ++c)
                    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(c * d + j)] = y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(j)];
                return;
            case SystemTag::mhd: {
                double mu = pair_.mu();
                const double* v = y.data();
                const double* H = y.data() + d;
                for (int c = 0; c < d; ++c)
                    for (int j = 0; j < d; ++j) {
                        out[static_cast<std::size_t>(c * d + j)] = v[c] * v[j] - mu * H[c] * H[j];
                        out[static_cast<std::size_t>((d + c) * d + j)] = H[c] * v[j] - v[c] * H[j];
                    }
                return;
            }
            case SystemTag::compressible: {
                double h = y[0];
                const double* mom = y.data() + 1;
                for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = mom[j];
                if (h > 0.0) {
                    double p = pair_.pressure(h);
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j)
                            out[static_cast<std::size_t>((1 + c) * d + j)] = mom[c] * mom[j] / h + (c == j ? p : 0.0);
                } else {
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>((1 + c) * d + j)] = 0.0;
                }
                return;
            }
        }
        throw ContractError("unknown system tag");
    }

    /// Directional flux derivative DF(y)[w] into out[c*d + j].
    void flux_derivative_point(std::span<const double> y, std::span<const double> w, std::span<double> out) const {
        const int m = components(), d = d_;
        switch (sys_) {
            case SystemTag::burgers:
                out[0] = y[0] * w[0];
                return;
            case SystemTag::euler:
                for (int c = 0; c < d; ++c)
                    for (int j = 0; j < d; ++j)
                        out[static_cast<std::size_t>(c * d + j)] =
                            w[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(j)] + y[static_cast<std::size_t>(c)] * w[static_cast<std::size_t>(j)];
                return;
            case SystemTag::mhd: {
                double mu = pair_.mu();
                const double* v = y.data();
                const double* H = y.data() + d;
                const double* wv = w.data();
                const double* wH = w.data() + d;
                for (int c = 0; c < d; ++c)
                    for (int j = 0; j < d; ++j) {
                        out[static_cast<std::size_t>(c * d + j)] =
                            wv[c] * v[j] + v[c] * wv[j] - mu * (wH[c] * H[j] + H[c] * wH[j]);
                        out[static_cast<std::size_t>((d + c) * d + j)] =
                            wH[c] * v[j] + H[c] * wv[j] - wv[c] * H[j] - v[c] * wH[j];
                    }
                return;
            }
            case SystemTag::compressible: {
                double h = y[0], wh = w[0];
                const double* mom = y.data() + 1;
                const double* wm = w.data() + 1;
                for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = wm[j];
                if (h > 0.0) {
                    double dp = pair_.pressure_slope(h) * wh;
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j)
                            out[static_cast<std::size_t>((1 + c) * d + j)] =
                                (wm[c] * mom[j] + mom[c] * wm[j]) / h - mom[c] * mom[j] / (h * h) * wh +
                                (c == j ? dp : 0.0);
                } else {
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>((1 + c) * d + j)] = 0.0;
                }
                return;
            }
        }
        (void)m;
        throw ContractError("unknown system tag");
    }

    /// Adjoint of the pairing derivative: out_k = d/dy_k (F(y) : G) for a
    /// fixed test-gradient sample G[c*d + j].
    void pairing_gradient_point(std::span<const double> y, std::span<const double> G, std::span<double> out) const {
        const int d = d_;
        switch (sys_) {
            case SystemTag::burgers:
                out[0] = y[0] * G[0];
                return;
            case SystemTag::euler:
                for (int k = 0; k < d; ++k) {
                    double s = 0.0;
                    for (int j = 0; j < d; ++j)
                        s += y[static_cast<std::size_t>(j)] *
                             (G[static_cast<std::size_t>(k * d + j)] + G[static_cast<std::size_t>(j * d + k)]);
                    out[static_cast<std::size_t>(k)] = s;
                }
                return;
            case SystemTag::mhd: {
                double mu = pair_.mu();
                const double* v = y.data();
                const double* H = y.data() + d;
                for (int k = 0; k < d; ++k) {
                    double sv = 0.0, sh = 0.0;
                    for (int j = 0; j < d; ++j) {
                        double gphi_kj = G[static_cast<std::size_t>(k * d + j)];
                        double gphi_jk = G[static_cast<std::size_t>(j * d + k)];
                        double gpsi_kj = G[static_cast<std::size_t>((d + k) * d + j)];
                        double gpsi_jk = G[static_cast<std::size_t>((d + j) * d + k)];
                        sv += v[j] * (gphi_kj + gphi_jk) + H[j] * (gpsi_jk - gpsi_kj);
                        sh += -mu * H[j] * (gphi_kj + gphi_jk) + v[j] * (gpsi_kj - gpsi_jk);
                    }
                    out[static_cast<std::size_t>(k)] = sv;
                    out[static_cast<std::size_t>(d + k)] = sh;
                }
                return;
            }
            case SystemTag::compressible: {
                double h = y[0];
                const double* mom = y.data() + 1;
                if (h <= 0.0) {
                    out[0] = 0.0;
                    for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(1 + k)] = G[static_cast<std::size_t>(k)];
                    return;
                }
                double dh = 0.0;
                double trG = 0.0;
                for (int c = 0; c < d; ++c) {
                    trG += G[static_cast<std::size_t>((1 + c) * d + c)];
                    for (int j = 0; j < d; ++j)
                        dh -= mom[c] / h * mom[j] / h * G[static_cast<std::size_t>((1 + c) * d + j)];
                }
                dh += pair_.pressure_slope(h) * trG;
                out[0] = dh;
                for (int k = 0; k < d; ++k) {
                    double s = G[static_cast<std::size_t>(k)];
                    for (int j = 0; j < d; ++j)
                        s += mom[j] / h *
                             (G[static_cast<std::size_t>((1 + k) * d + j)] + G[static_cast<std::size_t>((1 + j) * d + k)]);
                    out[static_cast<std::size_t>(1 + k)] = s;
                }
                return;
            }
        }
        throw ContractError("unknown system tag");
    }

    /// Nodal flux buffer, layout [node*(m*d) + c*d + j].
    std::vector<double> flux_nodal(const Grid& g, const Field& U) const {
        require_matches(g, U);
        const int m = components(), d = d_, total = g.total();
        std::vector<double> out(static_cast<std::size_t>(total * m * d));
        for (int i = 0; i < total; ++i)
            flux_point(std::span<const double>(U.data.data() + static_cast<std::ptrdiff_t>(i) * m, static_cast<std::size_t>(m)),
                       std::span<double>(out.data() + static_cast<std::ptrdiff_t>(i) * m * d, static_cast<std::size_t>(m * d)));
        return out;
    }

    /// Spectral divergence of the nodal flux: out component c = sum_j d_j F_cj.
    Field flux_divergence(const Grid& g, const Field& U) const {
        std::vector<double> fl = flux_nodal(g, U);
        const int m = components(), d = d_, total = g.total();
        Field out = make_field(g, m);
        Field column = make_field(g, 1);
        for (int c = 0; c < m; ++c)
            for (int j = 0; j < d; ++j) {
                for (int i = 0; i < total; ++i) column.at(i, 0) = fl[static_cast<std::size_t>(i * m * d + c * d + j)];
                Modes md = to_modes(g, column, 0);
                derivative_modes(g, md, j);
                Field der = make_field(g, 1);
                from_modes(g, std::move(md), der, 0);
                for (int i = 0; i < total; ++i) out.at(i, c) += der.at(i, 0);
            }
        return out;
    }

    /// integrate(F(U) : grad Phi) with the analytic test gradient.
    double flux_pairing(const Grid& g, const Field& U, const TestFunction& phi) const {
        EnergyValue e = total_entropy(pair_, g, U);
        if (!e.finite) throw ContractError("flux pairing needs finite entropy");
        TestEval ev = eval_test(phi, g);
        return flux_pairing_with_eval(g, flux_nodal(g, U), ev);
    }

    /// Pairing against a precomputed nodal flux buffer and test gradient.
    double flux_pairing_with_eval(const Grid& g, const std::vector<double>& flux_buf, const TestEval& ev) const {
        const int m = components(), d = d_, total = g.total();
        if (ev.gradient.m != m * d) throw ContractError("test gradient arity mismatch");
        return stable_dot(flux_buf, ev.gradient.data) / static_cast<double>(total);
    }

    /// Regularity weight K(Phi) >= 0; sup taken over grid nodes.
    double reg_weight(const Grid& g, const TestFunction& phi) const {
        if (phi.sys != sys_) throw ContractError("test function built for a different system");
        return reg_weight_from_gradient(g, eval_test(phi, g).gradient);
    }

    /// Same from a precomputed gradient field (m*d components).
    double reg_weight_from_gradient(const Grid& g, const Field& grad) const {
        const int d = d_, total = g.total();
        double sup1 = 0.0, sup2 = 0.0;
        for (int i = 0; i < total; ++i) {
            switch (sys_) {
                case SystemTag::burgers: {
                    double slope = grad.at(i, 0);
                    sup1 = std::max(sup1, std::max(0.0, -slope));
                    break;
                }
                case SystemTag::euler: {
                    Mat Gm = Mat::zero(d);
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j) Gm(c, j) = grad.at(i, c * d + j);
                    sup1 = std::max(sup1, neg_part_norm(sym_part(Gm)));
                    break;
                }
                case SystemTag::mhd: {
                    Mat Gphi = Mat::zero(d), Gpsi = Mat::zero(d);
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j) {
                            Gphi(c, j) = grad.at(i, c * d + j);
                            Gpsi(c, j) = grad.at(i, (d + c) * d + j);
                        }
                    sup1 = std::max(sup1, spectral_norm(sym_part(Gphi)));
                    sup2 = std::max(sup2, spectral_norm(skw_part(Gpsi)));
                    break;
                }
                case SystemTag::compressible: {
                    Mat Gm = Mat::zero(d);
                    for (int c = 0; c < d; ++c)
                        for (int j = 0; j < d; ++j) Gm(c, j) = grad.at(i, (1 + c) * d + j);
                    sup1 = std::max(sup1, neg_part_norm(sym_part(Gm)));
                    break;
                }
            }
        }
        switch (sys_) {
            case SystemTag::burgers: return sup1;
            case SystemTag::euler: return 2.0 * sup1;
            case SystemTag::mhd: return 2.0 * sup1 + 2.0 / std::sqrt(pair_.mu()) * sup2;
            case SystemTag::compressible: {
                double alpha = pair_.gamma() - 1.0;
                return std::max(2.0, alpha * static_cast<double>(d_)) * sup1;
            }
        }
        throw ContractError("unknown system tag");
    }

    /// integrate(F(d_eta_star(Phi)) : grad Phi) — an exact divergence, so the
    /// value is pure quadrature error; also reports a one-refinement error
    /// estimate.
    FluxIdentityReport entropy_flux_identity(const Grid& g, const TestFunction& phi) const {
        auto value_on = [&](const Grid& gg) {
            TestFunction p = phi;
            if (!p.basis || gg.nx() != g.nx() || gg.ny() != g.ny()) bind_basis(p, gg);
            Field U = dual_to_state(pair_, gg, p);
            TestEval ev = eval_test(p, gg);
            return flux_pairing_with_eval(gg, flux_nodal(gg, U), ev);
        };
        FluxIdentityReport rep;
        rep.value = value_on(g);
        Grid fine = make_grid(g.dim(), std::min(2 * g.nx(), 4096), g.dim() == 2 ? std::min(2 * g.ny(), 4096) : 0);
        rep.refinement_error = std::abs(rep.value - value_on(fine));
        return rep;
    }

    /// Jensen slack of J(U) = flux_pairing(U, Phi) + K(Phi) E(U) at the
    /// lambda-blend, plus the blended value itself (non-negativity probe).
    ConvexityReport convexity_probe(const Grid& g, const TestFunction& phi, const Field& U1, const Field& U2,
                                    double lambda) const {
        EnergyValue e1 = total_entropy(pair_, g, U1), e2 = total_entropy(pair_, g, U2);
        if (!e1.finite || !e2.finite) throw ContractError("convexity probe needs finite entropy");
        double K = reg_weight(g, phi);
        Field mid = U1;
        for (std::size_t i = 0; i < mid.data.size(); ++i)
            mid.data[i] = lambda * U1.data[i] + (1.0 - lambda) * U2.data[i];
        EnergyValue em = total_entropy(pair_, g, mid);
        if (!em.finite) throw ContractError("blend left the entropy domain");
        double j1 = flux_pairing(g, U1, phi) + K * e1.value;
        double j2 = flux_pairing(g, U2, phi) + K * e2.value;
        double jm = flux_pairing(g, mid, phi) + K * em.value;
        return {jm - lambda * j1 - (1.0 - lambda) * j2, jm};
    }

    /// Linear subspace projection for displacements, residuals, and descent
    /// directions: band limit plus divergence-free projection for the
    /// quadratic systems, identity for compressible fields (their admissible
    /// set is the full nodal entropy domain).
    void project_tangent(const Grid& g, Field& w) const {
        require_matches(g, w);
        if (sys_ == SystemTag::compressible) return;
        int cutoff = cubic_exact_cutoff(g);
        for (int c = 0; c < w.m; ++c) {
            Modes md = to_modes(g, w, c);
            band_filter_modes(g, md, cutoff);
            from_modes(g, std::move(md), w, c);
        }
        if (sys_ == SystemTag::euler) leray_project(g, w, 0);
        if (sys_ == SystemTag::mhd) {
            leray_project(g, w, 0);
            leray_project(g, w, 2);
        }
    }

    /// Project a state onto the discrete admissible set. Quadratic systems
    /// use the linear subspace projection; compressible states get the nodal
    /// domain restoration (density clamped at zero, momentum zeroed on
    /// vacuum nodes) — a no-op on interior states.
    void project_state(const Grid& g, Field& U) const {
        require_matches(g, U);
        if (sys_ != SystemTag::compressible) {
            project_tangent(g, U);
            return;
        }
        const int total = g.total(), d = d_;
        for (int i = 0; i < total; ++i) {
            double& h = U.at(i, 0);
            if (h <= 0.0) {
                h = 0.0;
                for (int c = 1; c <= d; ++c) U.at(i, c) = 0.0;
            }
        }
    }

    /// Whether every node lies in dom eta (and the projector fixed points).
    bool admissible(const Grid& g, const Field& U) const {
        EnergyValue e = total_entropy(pair_, g, U);
        return e.finite;
    }

  private:
    SystemTag sys_;
    int d_;
    EntropyPair pair_;
    std::string name_;
};

inline SystemTag parse_system_tag(const std::string& s) {
    if (s == "burgers") return SystemTag::burgers;
    if (s == "euler") return SystemTag::euler;
    if (s == "mhd") return SystemTag::mhd;
    if (s == "compressible") return SystemTag::compressible;
    throw ConfigError("unknown system: " + s);
}

}  // namespace evs
