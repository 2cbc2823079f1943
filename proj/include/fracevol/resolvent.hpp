#pragma once

// Riemann-Liouville beta-order fractional resolvent, realized spectrally for
// diagonal operators in the sin(k v) basis on [0, pi] (Dirichlet Laplacian
// and friends). All operator actions are per-mode scalar multiplications:
//
//   (R_beta(t) w)_k        = t^{beta-2} E_{beta,beta-1}(lam_k t^beta) w_k
//   (int_0^t R_beta w)_k   = t^{beta-1} E_{beta,beta}  (lam_k t^beta) w_k
//   (I^beta R_beta(t) w)_k = t^{2beta-2} E_{beta,2beta-1}(lam_k t^beta) w_k
//
// The last two come from term-by-term integration of the series and are
// validated against quadrature in the test suite before anything uses them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fracevol/errors.hpp"
#include "fracevol/fraccalc.hpp"
#include "fracevol/special.hpp"

namespace fracevol::resolvent {

/// Coefficients of a function on [0, pi] in the sin(k v) basis, k = 1..N.
struct SpectralState {
    std::vector<double> c;

    SpectralState() = default;
    explicit SpectralState(std::size_t n) : c(n, 0.0) {}
    explicit SpectralState(std::vector<double> coeffs) : c(std::move(coeffs)) {}

    [[nodiscard]] std::size_t modes() const noexcept { return c.size(); }

    /// L2([0,pi]) norm of sum c_k sin(k v): sqrt(pi/2 * sum c_k^2).
    [[nodiscard]] double norm() const {
        double s = 0.0;
        for (double x : c) s += x * x;
        return std::sqrt(M_PI / 2.0 * s);
    }

    void validate() const {
        if (c.empty()) throw std::domain_error("SpectralState: no modes");
        for (double x : c)
            if (!std::isfinite(x)) throw std::domain_error("SpectralState: non-finite coeff");
    }

    SpectralState& operator+=(const SpectralState& o) {
        if (o.c.size() != c.size()) throw std::domain_error("SpectralState: size mismatch");
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
        return *this;
    }
    SpectralState& operator-=(const SpectralState& o) {
        if (o.c.size() != c.size()) throw std::domain_error("SpectralState: size mismatch");
        for (std::size_t i = 0; i < c.size(); ++i) c[i] -= o.c[i];
        return *this;
    }
    SpectralState& operator*=(double a) {
        for (double& x : c) x *= a;
        return *this;
    }

    friend SpectralState operator+(SpectralState a, const SpectralState& b) { return a += b; }
    friend SpectralState operator-(SpectralState a, const SpectralState& b) { return a -= b; }
    friend SpectralState operator*(double a, SpectralState s) { return s *= a; }

    /// Point value sum_k c_k sin(k v).
    [[nodiscard]] double at(double v) const {
        double s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k)
            s += c[k] * std::sin(static_cast<double>(k + 1) * v);
        return s;
    }
};

/// Diagonal negative-semidefinite operator given by its eigenvalues.
struct SpectralOperator {
    std::vector<double> eigenvalues;  // nonincreasing, all <= 0

    void validate() const {
        if (eigenvalues.empty()) throw std::domain_error("SpectralOperator: no modes");
        for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
            if (!(eigenvalues[i] <= 0.0))
                throw std::domain_error("SpectralOperator: eigenvalues must be <= 0");
            if (i > 0 && eigenvalues[i] > eigenvalues[i - 1])
                throw std::domain_error("SpectralOperator: eigenvalues must be nonincreasing");
        }
    }

    [[nodiscard]] std::size_t modes() const noexcept { return eigenvalues.size(); }

    /// d^2/dv^2 with Dirichlet conditions on [0, pi]: eigenvalues -k^2.
    [[nodiscard]] static SpectralOperator dirichlet_laplacian(int n) {
        if (n < 1) throw std::domain_error("dirichlet_laplacian: need n >= 1");
        SpectralOperator op;
        op.eigenvalues.reserve(static_cast<std::size_t>(n));
        for (int k = 1; k <= n; ++k)
            op.eigenvalues.push_back(-static_cast<double>(k) * k);
        return op;
    }
};

/// Order and generator of the resolvent family; owns the Mittag-Leffler
/// evaluators for the three second parameters the closed forms need.
class ResolventParams {
public:
    ResolventParams(double beta, SpectralOperator op)
        : beta_(beta), op_(std::move(op)),
          ml_bm1_({beta, beta - 1.0}),
          ml_b_({beta, beta}),
          ml_2bm1_({beta, 2.0 * beta - 1.0}) {
        if (!(beta > 1.0 && beta < 2.0))
            throw std::domain_error("ResolventParams: beta must lie in (1,2)");
        op_.validate();
    }

    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] const SpectralOperator& op() const noexcept { return op_; }
    [[nodiscard]] std::size_t modes() const noexcept { return op_.modes(); }
    [[nodiscard]] double eigenvalue(std::size_t k) const { return op_.eigenvalues.at(k); }

    /// Per-mode resolvent factor t^{beta-2} E_{beta,beta-1}(lam t^beta), t > 0.
    [[nodiscard]] double rho(double t, std::size_t k) const {
        return std::pow(t, beta_ - 2.0) * ml_bm1_(eigenvalue(k) * std::pow(t, beta_));
    }
    /// Per-mode integral of the resolvent from 0: t^{beta-1} E_{beta,beta}(lam t^beta).
    [[nodiscard]] double iota(double t, std::size_t k) const {
        return std::pow(t, beta_ - 1.0) * ml_b_(eigenvalue(k) * std::pow(t, beta_));
    }
    /// Per-mode I^beta of the resolvent factor: t^{2beta-2} E_{beta,2beta-1}(lam t^beta).
    [[nodiscard]] double frac_integral(double t, std::size_t k) const {
        return std::pow(t, 2.0 * beta_ - 2.0) * ml_2bm1_(eigenvalue(k) * std::pow(t, beta_));
    }

    [[nodiscard]] double ml_second(double w) const { return ml_b_(w); }
    [[nodiscard]] double ml_resolvent(double w) const { return ml_bm1_(w); }

private:
    double beta_;
    SpectralOperator op_;
    special::MittagLeffler ml_bm1_;
    special::MittagLeffler ml_b_;
    special::MittagLeffler ml_2bm1_;
};

namespace detail {

inline void check_state(const ResolventParams& p, const SpectralState& w) {
    if (w.modes() != p.modes())
        throw std::domain_error("resolvent: state/operator mode count mismatch");
}

} // namespace detail

/// R_beta(t) w. Defined for t > 0 only.
[[nodiscard]] inline SpectralState resolvent_apply(const ResolventParams& p, double t,
                                                   const SpectralState& w) {
    if (!(t > 0.0)) throw std::domain_error("resolvent_apply: t must be > 0");
    detail::check_state(p, w);
    SpectralState out(w.modes());
    for (std::size_t k = 0; k < w.modes(); ++k) out.c[k] = p.rho(t, k) * w.c[k];
    return out;
}

/// int_0^t R_beta(r) w dr.
[[nodiscard]] inline SpectralState integrated_resolvent(const ResolventParams& p, double t,
                                                        const SpectralState& w) {
    if (!(t > 0.0)) throw std::domain_error("integrated_resolvent: t must be > 0");
    detail::check_state(p, w);
    SpectralState out(w.modes());
    for (std::size_t k = 0; k < w.modes(); ++k) out.c[k] = p.iota(t, k) * w.c[k];
    return out;
}

/// Time-sampled spectral source on (left, t_back], blowing up like
/// (r-left)^{-singular_exponent} at the open end.
struct SampledStates {
    double left = 0.0;
    std::vector<double> t;
    std::vector<SpectralState> z;
    double singular_exponent = 0.0;

    void validate() const {
        if (t.empty() || t.size() != z.size())
            throw std::domain_error("SampledStates: empty or inconsistent sampling");
        if (!(t.front() > left))
            throw std::domain_error("SampledStates: nodes must lie above the left endpoint");
        for (std::size_t i = 0; i + 1 < t.size(); ++i)
            if (!(t[i] < t[i + 1]))
                throw std::domain_error("SampledStates: nodes must be strictly increasing");
        if (!(singular_exponent >= 0.0 && singular_exponent < 1.0))
            throw std::domain_error("SampledStates: singular_exponent must lie in [0,1)");
    }
};

/// int_u^t K(t-r) g(r) dr per mode, K(s) = s^{beta-1} E_{beta,beta}(lam s^beta)
/// (the inner integral of the defining double convolution, done in closed
/// form). The source's power behaviour at u is convolved exactly via
///   int_u^t K(t-r)(r-u)^{-sigma} dr
///     = Gamma(1-sigma) T^{beta-sigma} E_{beta,beta+1-sigma}(lam T^beta);
/// the piecewise-linear remainder goes through product quadrature.
[[nodiscard]] inline SpectralState double_convolution(const ResolventParams& p, double u,
                                                      double t, const SampledStates& g) {
    g.validate();
    if (!(u < t)) throw std::domain_error("double_convolution: need u < t");
    if (g.left != u)
        throw std::domain_error("double_convolution: source must be sampled from u");
    double slack = 1e-12 * (std::abs(g.t.back()) + 1.0);
    if (t > g.t.back() + slack)
        throw std::domain_error("double_convolution: t beyond the sampled source");
    t = std::min(t, g.t.back());
    const std::size_t n_modes = p.modes();
    for (const auto& s : g.z) {
        if (s.modes() != n_modes)
            throw std::domain_error("double_convolution: source mode count mismatch");
    }

    const double beta = p.beta();
    const double sigma = g.singular_exponent;
    special::MittagLeffler ml_model({beta, beta + 1.0 - sigma});

    const double T = t - u;
    const double x1 = g.t.front() - u;
    const double g1sc = std::pow(x1, sigma);

    SpectralState out(n_modes);
    std::vector<double> gk(g.t.size());
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double lam = p.eigenvalue(k);
        const double modelC = g.z.front().c[k] * g1sc;

        // exact convolution of the power model over the full (u, t]
        double acc = modelC * special::gamma_fn(1.0 - sigma) * std::pow(T, beta - sigma)
                     * ml_model(lam * std::pow(T, beta));

        // piecewise-linear remainder
        auto model_at = [&](double r) {
            return (modelC == 0.0) ? 0.0 : modelC * std::pow(r - u, -sigma);
        };
        for (std::size_t i = 0; i < g.t.size(); ++i) gk[i] = g.z[i].c[k] - model_at(g.t[i]);
        auto kernel_smooth = [&](double r) {  // E part of K(t-r)
            return p.ml_second(lam * std::pow(t - r, beta));
        };
        double p_lo = kernel_smooth(g.t[0]) * gk[0];
        for (std::size_t l = 0; l + 1 < g.t.size() && g.t[l] < t; ++l) {
            double r_hi = std::min(g.t[l + 1], t);
            double g_hi;
            if (r_hi == g.t[l + 1]) {
                g_hi = gk[l + 1];
            } else {
                double w = (r_hi - g.t[l]) / (g.t[l + 1] - g.t[l]);
                g_hi = gk[l] + w * (gk[l + 1] - gk[l]);
            }
            double p_hi = kernel_smooth(r_hi) * g_hi;
            acc += fraccalc::weighted_pl_cell(beta - 1.0, t, g.t[l], r_hi, p_lo, p_hi);
            p_lo = p_hi;
        }
        out.c[k] = acc;
    }
    return out;
}

/// sup over the grid of the operator norm of t^{2-beta} R_beta(t)
/// = max over modes of |E_{beta,beta-1}(lam t^beta)|.
[[nodiscard]] inline double estimate_lambda_R(const ResolventParams& p,
                                              std::span<const double> t_grid) {
    if (t_grid.empty()) throw std::domain_error("estimate_lambda_R: empty grid");
    double best = 0.0;
    for (double t : t_grid) {
        if (!(t > 0.0)) throw std::domain_error("estimate_lambda_R: grid must be positive");
        double tb = std::pow(t, p.beta());
        for (std::size_t k = 0; k < p.modes(); ++k)
            best = std::max(best, std::abs(p.ml_resolvent(p.eigenvalue(k) * tb)));
    }
    return best;
}

/// Defect of the resolvent functional equation
///   R(r) I_t^beta R(t) - I_r^beta R(r) R(t)
///     = r^{beta-2}/Gamma(beta-1) I_t^beta R(t) - t^{beta-2}/Gamma(beta-1) I_r^beta R(r)
/// per mode against the closed-form I^beta factors, folded with the
/// commutation defect R(r)R(t) - R(t)R(r) (exactly zero for diagonal ops).
[[nodiscard]] inline double resolvent_axiom_check(const ResolventParams& p, double r, double t,
                                                  const SpectralState& w) {
    if (!(r > 0.0) || !(t > 0.0))
        throw std::domain_error("resolvent_axiom_check: r, t must be > 0");
    detail::check_state(p, w);
    const double gb = special::gamma_fn(p.beta() - 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < w.modes(); ++k) {
        double rho_r = p.rho(r, k), rho_t = p.rho(t, k);
        double P_r = p.frac_integral(r, k), P_t = p.frac_integral(t, k);
        double lhs = rho_r * P_t - P_r * rho_t;
        double rhs = std::pow(r, p.beta() - 2.0) / gb * P_t
                     - std::pow(t, p.beta() - 2.0) / gb * P_r;
        double commut = rho_r * rho_t - rho_t * rho_r;
        worst = std::max(worst, std::abs(lhs - rhs) * std::abs(w.c[k]));
        worst = std::max(worst, std::abs(commut) * std::abs(w.c[k]));
    }
    return worst;
}

} // namespace fracevol::resolvent
