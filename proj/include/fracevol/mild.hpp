#pragma once

// Piecewise mild-solution machinery for the impulsive fractional evolution
// system of order beta in (1,2):
//
//   solve intervals (u_j, t_{j+1}]:
//       z(t) = R(t-u_j) P_j + int_{u_j}^t R(r-u_j) ztilde_j dr
//              + int_{u_j}^t K(t-r) [h(r,z(r)) - Phi_j(r,z)] dr
//       with P_j = (1/(u_j-t_j)) int_{t_j}^{u_j} phi_j(r, z(t_j^-)) dr
//       (P_0 = z0, Phi_0 = 0),
//   impulse intervals (t_j, u_j]:
//       z(t) = phi_j(t, z(t_j^-)),
//
// where Phi_j carries the history of the global-lower-limit derivative
// across all earlier intervals. Picard iteration of this operator converges
// to the mild solution whenever the contraction certificate holds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fracevol/catalog.hpp"
#include "fracevol/errors.hpp"
#include "fracevol/fraccalc.hpp"
#include "fracevol/resolvent.hpp"
#include "fracevol/special.hpp"

namespace fracevol::mild {

using resolvent::SpectralState;

/// Impulse timetable 0 = u_0 < t_1 < u_1 < ... < u_m < t_{m+1} = u_{m+1} = a.
struct Partition {
    std::vector<double> u;  // u_0 .. u_{m+1}
    std::vector<double> t;  // index 0 unused; t_1 .. t_{m+1}

    [[nodiscard]] static Partition make(std::vector<double> u_pts,
                                        std::vector<double> t_pts) {
        Partition p;
        p.u = std::move(u_pts);
        p.t.assign(1, 0.0);
        p.t.insert(p.t.end(), t_pts.begin(), t_pts.end());
        p.validate();
        return p;
    }

    [[nodiscard]] int m() const { return static_cast<int>(u.size()) - 2; }
    [[nodiscard]] double a() const { return u.back(); }

    [[nodiscard]] double tau() const {
        double best = 0.0;
        for (int j = 0; j <= m(); ++j) best = std::max(best, t[static_cast<std::size_t>(j) + 1] - u[static_cast<std::size_t>(j)]);
        return best;
    }

    void validate() const {
        if (u.size() < 2 || t.size() != u.size())
            throw validation_error("partition: need u_0..u_{m+1} and t_1..t_{m+1}");
        for (double x : u)
            if (!std::isfinite(x)) throw validation_error("partition: non-finite point");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!std::isfinite(t[i])) throw validation_error("partition: non-finite point");
        if (u[0] != 0.0) throw validation_error("partition: u_0 must be 0");
        const int mm = m();
        for (int j = 1; j <= mm + 1; ++j) {
            if (!(u[static_cast<std::size_t>(j) - 1] < t[static_cast<std::size_t>(j)]))
                throw validation_error("partition: need u_" + std::to_string(j - 1) + " < t_" +
                                       std::to_string(j) + " (got " +
                                       std::to_string(u[static_cast<std::size_t>(j) - 1]) + " >= " +
                                       std::to_string(t[static_cast<std::size_t>(j)]) + ")");
        }
        for (int j = 1; j <= mm; ++j) {
            if (!(t[static_cast<std::size_t>(j)] < u[static_cast<std::size_t>(j)]))
                throw validation_error("partition: need t_" + std::to_string(j) + " < u_" +
                                       std::to_string(j) + " (got " +
                                       std::to_string(t[static_cast<std::size_t>(j)]) + " >= " +
                                       std::to_string(u[static_cast<std::size_t>(j)]) + ")");
        }
        if (t.back() != u.back())
            throw validation_error("partition: t_{m+1} must equal u_{m+1} = a");
    }
};

/// Full problem data: order, timetable, generator, initial data, certified
/// nonlinearity and impulse shapes, optional q diagnostic.
struct ProblemSpec {
    double beta = 1.5;
    Partition partition;
    resolvent::SpectralOperator op;
    SpectralState z0;
    std::vector<SpectralState> ztilde;  // ztilde_0 .. ztilde_m
    Nonlinearity h;
    std::vector<ImpulsePsi> psi;        // psi_1 .. psi_m
    std::optional<double> q_diag;

    [[nodiscard]] std::size_t modes() const { return op.modes(); }
    [[nodiscard]] int m() const { return partition.m(); }

    void validate() const {
        if (!(beta > 1.0 && beta < 2.0))
            throw validation_error("problem: beta must lie in (1,2)");
        partition.validate();
        op.validate();
        z0.validate();
        if (z0.modes() != modes())
            throw validation_error("problem: z0 mode count mismatch");
        if (ztilde.size() != static_cast<std::size_t>(m() + 1))
            throw validation_error("problem: need ztilde_0..ztilde_m");
        for (const auto& zt : ztilde) {
            zt.validate();
            if (zt.modes() != modes())
                throw validation_error("problem: ztilde mode count mismatch");
        }
        if (psi.size() != static_cast<std::size_t>(m()))
            throw validation_error("problem: need one impulse shape per impulse interval");
        if (q_diag && !std::isfinite(*q_diag))
            throw validation_error("problem: q diagnostic must be finite");
    }

    [[nodiscard]] double lambda_h() const { return h.lipschitz(); }
    /// Lipschitz constant of psi_j, j = 1..m.
    [[nodiscard]] double lambda_psi(int j) const {
        return psi.at(static_cast<std::size_t>(j) - 1).lipschitz();
    }
    /// Derived Lipschitz constant of phi_j = (u_j - t)^{1+beta} psi_j.
    [[nodiscard]] double lambda_phi(int j) const {
        double len = partition.u[static_cast<std::size_t>(j)] - partition.t[static_cast<std::size_t>(j)];
        return std::pow(len, 1.0 + beta) * lambda_psi(j);
    }

    [[nodiscard]] SpectralState psi_apply(int j, double tt, const SpectralState& z) const {
        SpectralState out(z.modes());
        psi.at(static_cast<std::size_t>(j) - 1).apply(tt, z, out);
        return out;
    }
    [[nodiscard]] SpectralState phi_apply(int j, double tt, const SpectralState& z) const {
        double uj = partition.u[static_cast<std::size_t>(j)];
        SpectralState out = psi_apply(j, tt, z);
        double fac = (tt >= uj) ? 0.0 : std::pow(uj - tt, 1.0 + beta);
        out *= fac;
        return out;
    }
};

/// Mesh resolution knobs for the piecewise trajectory.
struct MeshConfig {
    int solve_nodes = 256;
    int impulse_nodes = 64;
    double grading = 2.0;

    void validate() const {
        if (solve_nodes < 16) throw std::domain_error("MeshConfig: solve_nodes >= 16");
        if (impulse_nodes < 8) throw std::domain_error("MeshConfig: impulse_nodes >= 8");
        if (!(grading >= 1.0)) throw std::domain_error("MeshConfig: grading >= 1");
    }
};

/// Piecewise trajectory: one segment per solve interval and per impulse
/// interval, sampled on left-open meshes, with the anchor of the enclosing
/// weighted-norm interval attached.
struct Trajectory {
    enum class Kind { Solve, Impulse };
    struct Segment {
        Kind kind;
        int j;
        double left, right, anchor;
        std::vector<double> nodes;
        std::vector<SpectralState> z;
    };

    double beta = 0.0;
    MeshConfig mesh;
    std::vector<Segment> segments;  // solve_0, imp_1, solve_1, ..., imp_m, solve_m

    [[nodiscard]] int num_solve() const {
        return static_cast<int>((segments.size() + 1) / 2);
    }
    [[nodiscard]] const Segment& solve_seg(int j) const {
        return segments.at(static_cast<std::size_t>(2 * j));
    }
    [[nodiscard]] Segment& solve_seg(int j) {
        return segments.at(static_cast<std::size_t>(2 * j));
    }
    [[nodiscard]] const Segment& impulse_seg(int j) const {
        return segments.at(static_cast<std::size_t>(2 * j - 1));
    }
    [[nodiscard]] Segment& impulse_seg(int j) {
        return segments.at(static_cast<std::size_t>(2 * j - 1));
    }
    /// Left limit z(t_j^-): endpoint of the preceding solve segment.
    [[nodiscard]] const SpectralState& left_limit(int j) const {
        if (j < 1 || 2 * (j - 1) >= static_cast<int>(segments.size()))
            throw state_error("trajectory: missing history for left limit");
        return solve_seg(j - 1).z.back();
    }
};

/// Weighted piecewise norm: max over segments of
/// sup over mesh nodes of (t - anchor)^{2-beta} ||z(t)||.
[[nodiscard]] inline double pc_norm(const Trajectory& traj) {
    if (traj.segments.empty()) throw std::domain_error("pc_norm: empty trajectory");
    double best = 0.0;
    for (const auto& seg : traj.segments) {
        for (std::size_t i = 0; i < seg.nodes.size(); ++i) {
            double w = std::pow(seg.nodes[i] - seg.anchor, 2.0 - traj.beta);
            best = std::max(best, w * seg.z[i].norm());
        }
    }
    return best;
}

/// pc_norm of the difference of two structurally identical trajectories.
[[nodiscard]] inline double pc_diff_norm(const Trajectory& a, const Trajectory& b) {
    if (a.segments.size() != b.segments.size())
        throw state_error("pc_diff_norm: mismatched trajectories");
    double best = 0.0;
    for (std::size_t s = 0; s < a.segments.size(); ++s) {
        const auto& sa = a.segments[s];
        const auto& sb = b.segments[s];
        if (sa.nodes.size() != sb.nodes.size())
            throw state_error("pc_diff_norm: mismatched meshes");
        for (std::size_t i = 0; i < sa.nodes.size(); ++i) {
            double w = std::pow(sa.nodes[i] - sa.anchor, 2.0 - a.beta);
            best = std::max(best, w * (sa.z[i] - sb.z[i]).norm());
        }
    }
    return best;
}

namespace detail {

/// int_0^V (v/(1+v))^{1+beta} dv: Simpson head plus series tail.
[[nodiscard]] inline double psi_layer_integral(double V, double beta) {
    if (V <= 0.0) return 0.0;
    const double mu = 1.0 + beta;
    const double a = std::min(V, 40.0);
    auto f = [&](double v) { return std::pow(v / (1.0 + v), mu); };
    const int n = 400;
    const double h = a / n;
    double acc = f(0.0) + f(a);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
    acc *= h / 3.0;
    if (V > a) {
        acc += (V - a) - mu * std::log(V / a)
               + 0.5 * mu * (mu + 1.0) * (1.0 / a - 1.0 / V)
               - mu * (mu + 1.0) * (mu + 2.0) / 12.0 * (1.0 / (a * a) - 1.0 / (V * V));
    }
    return acc;
}

/// Weights of Phi_j(t, .) as linear functionals of the sampled history.
struct PhiRow {
    std::vector<std::vector<double>> wz;    // per history solve segment k = 0..j-1
    std::vector<std::vector<double>> wimp;  // per impulse q = 1..j-1, on extended nodes
    std::vector<double> wpsi;               // impulse j in psi form, on extended nodes
};

/// History weight row for Phi_j evaluated at tt in (u_j, t_{j+1}].
/// solve_nodes[k] are the meshes of the earlier solve segments, imp_ext[q-1]
/// the impulse meshes with t_q prepended.
[[nodiscard]] inline PhiRow build_phi_row(const ProblemSpec& spec,
                                          const std::vector<std::vector<double>>& solve_nodes,
                                          const std::vector<std::vector<double>>& imp_ext,
                                          int j, double tt) {
    const double beta = spec.beta;
    const double sigma = 2.0 - beta;
    const double pref = beta * (beta - 1.0) / special::gamma_fn(2.0 - beta);
    const auto& u = spec.partition.u;
    const auto& tp = spec.partition.t;

    PhiRow row;
    row.wz.resize(static_cast<std::size_t>(j));
    row.wimp.resize(static_cast<std::size_t>(j) - 1);

    // z-history over solve segments k = 0..j-1
    for (int k = 0; k < j; ++k) {
        const auto& s = solve_nodes[static_cast<std::size_t>(k)];
        const double uk = u[static_cast<std::size_t>(k)];
        const double X = tp[static_cast<std::size_t>(k) + 1] - uk;
        std::vector<double> w(s.size(), 0.0);
        for (std::size_t l = 0; l + 1 < s.size(); ++l) {
            auto cw = fraccalc::weighted_pl_cell_weights(-1.0 - beta, tt, s[l], s[l + 1]);
            w[l] += cw.lo;
            w[l + 1] += cw.hi;
        }
        // exact convolution of the (r-u_k)^{beta-2} head model:
        //   int_0^X x^{beta-2} (A-x)^{-1-beta} dx = A^{-2} Fcl(X/A)
        const double A = tt - uk;
        const double y = X / A;
        const double Fcl = std::pow(y, beta - 1.0) * std::pow(1.0 - y, -beta)
                           * (beta - y) / (beta * (beta - 1.0));
        double exact = Fcl / (A * A);
        double corr = exact;
        for (std::size_t l = 0; l < s.size(); ++l)
            corr -= w[l] * std::pow(s[l] - uk, -sigma);
        w[0] += corr * std::pow(s[0] - uk, sigma);
        for (double& x : w) x *= pref;
        row.wz[static_cast<std::size_t>(k)] = std::move(w);
    }

    // impulse history q = 1..j-1, smooth kernel, phi values on extended nodes
    for (int q = 1; q < j; ++q) {
        const auto& e = imp_ext[static_cast<std::size_t>(q) - 1];
        std::vector<double> w(e.size(), 0.0);
        for (std::size_t l = 0; l + 1 < e.size(); ++l) {
            auto cw = fraccalc::weighted_pl_cell_weights(-1.0 - beta, tt, e[l], e[l + 1]);
            w[l] += cw.lo;
            w[l + 1] += cw.hi;
        }
        for (double& x : w) x *= pref;
        row.wimp[static_cast<std::size_t>(q) - 1] = std::move(w);
    }

    // own impulse in psi form: integrand ((u_j-s)/(tt-s))^{1+beta} psi_j(s),
    // bounded by |psi|; the boundary layer at s ~ u_j (width ~ tt-u_j) is
    // integrated against the constant psi(u_j)
    {
        const auto& e = imp_ext[static_cast<std::size_t>(j) - 1];
        const double uj = u[static_cast<std::size_t>(j)];
        const double tj = tp[static_cast<std::size_t>(j)];
        const double d = tt - uj;
        std::vector<double> w(e.size(), 0.0);
        auto kappa = [&](double s) {
            if (s >= uj) return 0.0;
            return std::pow((uj - s) / (tt - s), 1.0 + beta);
        };
        std::size_t smooth_end = e.size() - 1;  // trapezoid over cells < smooth_end
        if (d < (uj - tj) / 10.0) {
            double cut = uj - 10.0 * d;
            smooth_end = 0;
            while (smooth_end + 1 < e.size() && e[smooth_end + 1] <= cut) ++smooth_end;
            double V = (uj - e[smooth_end]) / d;
            w.back() += d * psi_layer_integral(V, beta);
        }
        for (std::size_t l = 0; l < smooth_end; ++l) {
            double hcell = e[l + 1] - e[l];
            w[l] += 0.5 * hcell * kappa(e[l]);
            w[l + 1] += 0.5 * hcell * kappa(e[l + 1]);
        }
        for (double& x : w) x *= pref;
        row.wpsi = std::move(w);
    }
    return row;
}

} // namespace detail

/// Per-iteration record of the Picard run.
struct ConvergenceReport {
    bool converged = false;
    int iterations = 0;
    double tol = 0.0;
    std::vector<double> diff_norms;
    std::vector<double> ratios;
};

class non_convergence : public std::runtime_error {
public:
    non_convergence(const std::string& msg, ConvergenceReport rep)
        : std::runtime_error(msg), report(std::move(rep)) {}
    ConvergenceReport report;
};

/// The mild-solution operator Xi on a fixed mesh. Construction precomputes
/// the resolvent factors, the convolution weight matrices per mode and the
/// history weight rows; apply() is then pure linear algebra plus catalog
/// evaluations.
class XiOperator {
public:
    explicit XiOperator(ProblemSpec spec, MeshConfig mesh = {})
        : spec_(std::move(spec)), mesh_(mesh),
          rp_(spec_.beta, spec_.op) {
        spec_.validate();
        mesh_.validate();
        m_ = spec_.m();
        nmod_ = spec_.modes();
        build_meshes();
        build_weights();
    }

    [[nodiscard]] const ProblemSpec& problem() const noexcept { return spec_; }
    [[nodiscard]] const MeshConfig& mesh_config() const noexcept { return mesh_; }
    [[nodiscard]] const resolvent::ResolventParams& rparams() const noexcept { return rp_; }

    [[nodiscard]] Trajectory zero_trajectory() const { return skeleton(); }

    /// Data-terms-only trajectory: exact for the linear homogeneous problem.
    [[nodiscard]] Trajectory homogeneous_guess() const {
        Trajectory out = skeleton();
        for (int j = 0; j <= m_; ++j) {
            SpectralState lead = (j == 0) ? spec_.z0 : SpectralState(nmod_);
            if (j >= 1) {
                const SpectralState& zl = out.left_limit(j);
                fill_impulse(out, j, zl);
                lead = impulse_average(j, zl);
            }
            fill_solve_linear(out, j, lead);
        }
        return out;
    }

    /// One application of the mild-solution operator to the input trajectory.
    [[nodiscard]] Trajectory apply(const Trajectory& in) const {
        check_compatible(in);
        Trajectory out = skeleton();

        // catalog samples driven by the input's left limits
        std::vector<std::vector<SpectralState>> phi_ext(static_cast<std::size_t>(m_) + 1);
        std::vector<std::vector<SpectralState>> psi_ext(static_cast<std::size_t>(m_) + 1);
        std::vector<SpectralState> pavg(static_cast<std::size_t>(m_) + 1, SpectralState(nmod_));
        for (int j = 1; j <= m_; ++j) {
            const SpectralState& zl = in.left_limit(j);
            const auto& e = imp_ext_[static_cast<std::size_t>(j) - 1];
            auto& pj = phi_ext[static_cast<std::size_t>(j)];
            auto& qj = psi_ext[static_cast<std::size_t>(j)];
            pj.reserve(e.size());
            qj.reserve(e.size());
            for (double s : e) {
                pj.push_back(spec_.phi_apply(j, s, zl));
                qj.push_back(spec_.psi_apply(j, s, zl));
            }
            pavg[static_cast<std::size_t>(j)] = average_from_samples(j, pj);
            auto& seg = out.impulse_seg(j);
            for (std::size_t i = 0; i < seg.nodes.size(); ++i) seg.z[i] = pj[i + 1];
        }

        for (int j = 0; j <= m_; ++j) {
            const auto& nodes = solve_nodes_[static_cast<std::size_t>(j)];
            const auto& so = segop_[static_cast<std::size_t>(j)];
            const std::size_t n = nodes.size();

            // g = h(r, z(r)) - Phi_j(r, z) on the mesh
            std::vector<SpectralState> g(n, SpectralState(nmod_));
            SpectralState hval(nmod_);
            for (std::size_t i = 0; i < n; ++i) {
                spec_.h.apply(nodes[i], in.solve_seg(j).z[i], hval);
                g[i] = hval;
                if (j >= 1) {
                    const auto& row = so.phi[i];
                    for (int k = 0; k < j; ++k) {
                        const auto& w = row.wz[static_cast<std::size_t>(k)];
                        const auto& hist = in.solve_seg(k).z;
                        for (std::size_t l = 0; l < w.size(); ++l) {
                            if (w[l] == 0.0) continue;
                            for (std::size_t md = 0; md < nmod_; ++md)
                                g[i].c[md] -= w[l] * hist[l].c[md];
                        }
                    }
                    for (int q = 1; q < j; ++q) {
                        const auto& w = row.wimp[static_cast<std::size_t>(q) - 1];
                        const auto& vals = phi_ext[static_cast<std::size_t>(q)];
                        for (std::size_t l = 0; l < w.size(); ++l) {
                            if (w[l] == 0.0) continue;
                            for (std::size_t md = 0; md < nmod_; ++md)
                                g[i].c[md] -= w[l] * vals[l].c[md];
                        }
                    }
                    const auto& vals = psi_ext[static_cast<std::size_t>(j)];
                    for (std::size_t l = 0; l < row.wpsi.size(); ++l) {
                        if (row.wpsi[l] == 0.0) continue;
                        for (std::size_t md = 0; md < nmod_; ++md)
                            g[i].c[md] -= row.wpsi[l] * vals[l].c[md];
                    }
                }
            }

            const SpectralState& lead = (j == 0) ? spec_.z0 : pavg[static_cast<std::size_t>(j)];
            const SpectralState& zt = spec_.ztilde[static_cast<std::size_t>(j)];
            auto& seg = out.solve_seg(j);
            for (std::size_t md = 0; md < nmod_; ++md) {
                const auto& W = so.W[md];
                for (std::size_t i = 0; i < n; ++i) {
                    double conv = 0.0;
                    const std::size_t off = i * (i + 1) / 2;
                    for (std::size_t l = 0; l <= i; ++l) conv += W[off + l] * g[l].c[md];
                    seg.z[i].c[md] = so.rho[md][i] * lead.c[md]
                                     + so.iota[md][i] * zt.c[md] + conv;
                }
            }
        }
        return out;
    }

    /// Phi_j(tt, in) for arbitrary tt in (u_j, t_{j+1}].
    [[nodiscard]] SpectralState phi_at(int j, double tt, const Trajectory& in) const {
        check_compatible(in);
        if (j == 0) return SpectralState(nmod_);
        auto row = detail::build_phi_row(spec_, solve_nodes_, imp_ext_, j, tt);
        const SpectralState& zl = in.left_limit(j);
        return apply_phi_row(row, j, in, zl);
    }

    /// Average of the impulse function over its interval (the Case-3 lead term).
    [[nodiscard]] SpectralState impulse_average(int j, const SpectralState& zl) const {
        const auto& e = imp_ext_[static_cast<std::size_t>(j) - 1];
        std::vector<SpectralState> vals;
        vals.reserve(e.size());
        for (double s : e) vals.push_back(spec_.phi_apply(j, s, zl));
        return average_from_samples(j, vals);
    }

    [[nodiscard]] const std::vector<double>& solve_mesh(int j) const {
        return solve_nodes_[static_cast<std::size_t>(j)];
    }
    [[nodiscard]] const std::vector<double>& impulse_ext_mesh(int j) const {
        return imp_ext_[static_cast<std::size_t>(j) - 1];
    }

private:
    struct SegOp {
        std::vector<std::vector<double>> rho;   // [mode][node]
        std::vector<std::vector<double>> iota;  // [mode][node]
        std::vector<std::vector<double>> W;     // [mode][packed lower triangle]
        std::vector<detail::PhiRow> phi;        // [node], empty for j = 0
    };

    void build_meshes() {
        const auto& u = spec_.partition.u;
        const auto& tp = spec_.partition.t;
        solve_nodes_.resize(static_cast<std::size_t>(m_) + 1);
        for (int j = 0; j <= m_; ++j) {
            fraccalc::GradedMesh mesh(u[static_cast<std::size_t>(j)], tp[static_cast<std::size_t>(j) + 1],
                                      mesh_.solve_nodes, mesh_.grading);
            solve_nodes_[static_cast<std::size_t>(j)] = mesh.sample_nodes();
        }
        imp_ext_.resize(static_cast<std::size_t>(std::max(m_, 0)));
        for (int j = 1; j <= m_; ++j) {
            double tj = tp[static_cast<std::size_t>(j)], uj = u[static_cast<std::size_t>(j)];
            std::vector<double> e(static_cast<std::size_t>(mesh_.impulse_nodes) + 1);
            for (int l = 0; l <= mesh_.impulse_nodes; ++l)
                e[static_cast<std::size_t>(l)] = tj + (uj - tj) * l / mesh_.impulse_nodes;
            e.back() = uj;
            imp_ext_[static_cast<std::size_t>(j) - 1] = std::move(e);
        }
    }

    void build_weights() {
        const double beta = spec_.beta;
        const double sigma = 2.0 - beta;
        const double gb1 = special::gamma_fn(beta - 1.0);
        segop_.resize(static_cast<std::size_t>(m_) + 1);
        for (int j = 0; j <= m_; ++j) {
            const auto& nodes = solve_nodes_[static_cast<std::size_t>(j)];
            const double uj = spec_.partition.u[static_cast<std::size_t>(j)];
            const std::size_t n = nodes.size();
            auto& so = segop_[static_cast<std::size_t>(j)];
            so.rho.assign(nmod_, std::vector<double>(n));
            so.iota.assign(nmod_, std::vector<double>(n));
            so.W.assign(nmod_, std::vector<double>(n * (n + 1) / 2, 0.0));

            const double x1 = nodes[0] - uj;
            const double x1s = std::pow(x1, sigma);
            std::vector<double> basis(n);
            for (std::size_t l = 0; l < n; ++l) basis[l] = std::pow(nodes[l] - uj, -sigma);

            std::vector<double> evals(n);
            for (std::size_t md = 0; md < nmod_; ++md) {
                const double lam = rp_.eigenvalue(md);
                auto& W = so.W[md];
                for (std::size_t i = 0; i < n; ++i) {
                    const double ti = nodes[i];
                    const double T = ti - uj;
                    so.rho[md][i] = rp_.rho(T, md);
                    so.iota[md][i] = rp_.iota(T, md);
                    const std::size_t off = i * (i + 1) / 2;
                    for (std::size_t l = 0; l <= i; ++l)
                        evals[l] = rp_.ml_second(lam * std::pow(ti - nodes[l], beta));
                    for (std::size_t l = 0; l < i; ++l) {
                        auto cw = fraccalc::weighted_pl_cell_weights(beta - 1.0, ti,
                                                                     nodes[l], nodes[l + 1]);
                        W[off + l] += cw.lo * evals[l];
                        W[off + l + 1] += cw.hi * evals[l + 1];
                    }
                    // exact power-model column: conv of (r-u)^{-sigma} is
                    // Gamma(beta-1) T^{2beta-2} E_{beta,2beta-1}(lam T^beta)
                    double exact = gb1 * rp_.frac_integral(T, md);
                    double corr = exact;
                    for (std::size_t l = 0; l <= i; ++l) corr -= W[off + l] * basis[l];
                    W[off] += corr * x1s;
                }
            }

            if (j >= 1) {
                so.phi.reserve(n);
                for (std::size_t i = 0; i < n; ++i)
                    so.phi.push_back(detail::build_phi_row(spec_, solve_nodes_, imp_ext_,
                                                           j, nodes[i]));
            }
        }
    }

    [[nodiscard]] Trajectory skeleton() const {
        Trajectory out;
        out.beta = spec_.beta;
        out.mesh = mesh_;
        const auto& u = spec_.partition.u;
        const auto& tp = spec_.partition.t;
        for (int j = 0; j <= m_; ++j) {
            if (j >= 1) {
                Trajectory::Segment imp;
                imp.kind = Trajectory::Kind::Impulse;
                imp.j = j;
                imp.left = tp[static_cast<std::size_t>(j)];
                imp.right = u[static_cast<std::size_t>(j)];
                imp.anchor = u[static_cast<std::size_t>(j) - 1];
                const auto& e = imp_ext_[static_cast<std::size_t>(j) - 1];
                imp.nodes.assign(e.begin() + 1, e.end());
                imp.z.assign(imp.nodes.size(), SpectralState(nmod_));
                out.segments.push_back(std::move(imp));
            }
            Trajectory::Segment sol;
            sol.kind = Trajectory::Kind::Solve;
            sol.j = j;
            sol.left = u[static_cast<std::size_t>(j)];
            sol.right = tp[static_cast<std::size_t>(j) + 1];
            sol.anchor = u[static_cast<std::size_t>(j)];
            sol.nodes = solve_nodes_[static_cast<std::size_t>(j)];
            sol.z.assign(sol.nodes.size(), SpectralState(nmod_));
            out.segments.push_back(std::move(sol));
        }
        return out;
    }

    void fill_impulse(Trajectory& out, int j, const SpectralState& zl) const {
        auto& seg = out.impulse_seg(j);
        for (std::size_t i = 0; i < seg.nodes.size(); ++i)
            seg.z[i] = spec_.phi_apply(j, seg.nodes[i], zl);
    }

    void fill_solve_linear(Trajectory& out, int j, const SpectralState& lead) const {
        const auto& so = segop_[static_cast<std::size_t>(j)];
        const SpectralState& zt = spec_.ztilde[static_cast<std::size_t>(j)];
        auto& seg = out.solve_seg(j);
        for (std::size_t md = 0; md < nmod_; ++md)
            for (std::size_t i = 0; i < seg.nodes.size(); ++i)
                seg.z[i].c[md] = so.rho[md][i] * lead.c[md] + so.iota[md][i] * zt.c[md];
    }

    [[nodiscard]] SpectralState average_from_samples(int j,
                                                     const std::vector<SpectralState>& vals) const {
        const auto& e = imp_ext_[static_cast<std::size_t>(j) - 1];
        SpectralState acc(nmod_);
        for (std::size_t l = 0; l + 1 < e.size(); ++l) {
            double hcell = 0.5 * (e[l + 1] - e[l]);
            for (std::size_t md = 0; md < nmod_; ++md)
                acc.c[md] += hcell * (vals[l].c[md] + vals[l + 1].c[md]);
        }
        double len = e.back() - e.front();
        acc *= 1.0 / len;
        return acc;
    }

    [[nodiscard]] SpectralState apply_phi_row(const detail::PhiRow& row, int j,
                                              const Trajectory& in,
                                              const SpectralState& zl) const {
        SpectralState acc(nmod_);
        for (int k = 0; k < j; ++k) {
            const auto& w = row.wz[static_cast<std::size_t>(k)];
            const auto& hist = in.solve_seg(k).z;
            for (std::size_t l = 0; l < w.size(); ++l)
                for (std::size_t md = 0; md < nmod_; ++md)
                    acc.c[md] += w[l] * hist[l].c[md];
        }
        for (int q = 1; q < j; ++q) {
            const auto& w = row.wimp[static_cast<std::size_t>(q) - 1];
            const auto& e = imp_ext_[static_cast<std::size_t>(q) - 1];
            const SpectralState& zq = in.left_limit(q);
            for (std::size_t l = 0; l < w.size(); ++l) {
                if (w[l] == 0.0) continue;
                SpectralState v = spec_.phi_apply(q, e[l], zq);
                for (std::size_t md = 0; md < nmod_; ++md) acc.c[md] += w[l] * v.c[md];
            }
        }
        {
            const auto& e = imp_ext_[static_cast<std::size_t>(j) - 1];
            for (std::size_t l = 0; l < row.wpsi.size(); ++l) {
                if (row.wpsi[l] == 0.0) continue;
                SpectralState v = spec_.psi_apply(j, e[l], zl);
                for (std::size_t md = 0; md < nmod_; ++md)
                    acc.c[md] += row.wpsi[l] * v.c[md];
            }
        }
        return acc;
    }

    void check_compatible(const Trajectory& in) const {
        if (in.segments.size() != static_cast<std::size_t>(2 * m_ + 1))
            throw state_error("trajectory does not match the problem partition");
        for (int j = 0; j <= m_; ++j)
            if (in.solve_seg(j).nodes.size() != solve_nodes_[static_cast<std::size_t>(j)].size())
                throw state_error("trajectory mesh does not match the operator mesh");
    }

    ProblemSpec spec_;
    MeshConfig mesh_;
    resolvent::ResolventParams rp_;
    int m_ = 0;
    std::size_t nmod_ = 0;
    std::vector<std::vector<double>> solve_nodes_;
    std::vector<std::vector<double>> imp_ext_;
    std::vector<SegOp> segop_;
};

/// One application of the mild-solution operator (operator built per call;
/// use XiOperator directly for iteration).
[[nodiscard]] inline Trajectory apply_Xi(const ProblemSpec& spec, const Trajectory& traj) {
    XiOperator op(spec, traj.mesh);
    return op.apply(traj);
}

/// History correction Phi_j(t, traj) at one point.
[[nodiscard]] inline SpectralState phi_correction(const ProblemSpec& spec,
                                                  const Trajectory& traj, int j, double tt) {
    spec.validate();
    if (j == 0) return SpectralState(spec.modes());
    if (j < 1 || j > spec.m())
        throw std::domain_error("phi_correction: impulse index out of range");
    if (!(tt > spec.partition.u[static_cast<std::size_t>(j)]))
        throw std::domain_error("phi_correction: t must lie above u_j");
    XiOperator op(spec, traj.mesh);
    return op.phi_at(j, tt, traj);
}

enum class InitialGuess { Homogeneous, Zero };

struct SolveResult {
    Trajectory trajectory;
    ConvergenceReport report;
};

/// Picard iteration of the mild-solution operator to the fixed point.
[[nodiscard]] inline SolveResult solve(const ProblemSpec& spec, double tol, int max_iter,
                                       MeshConfig mesh = {},
                                       InitialGuess guess = InitialGuess::Homogeneous) {
    if (!(tol > 0.0)) throw std::domain_error("solve: tol must be > 0");
    if (max_iter < 1) throw std::domain_error("solve: max_iter must be >= 1");
    XiOperator op(spec, mesh);
    Trajectory z = (guess == InitialGuess::Zero) ? op.zero_trajectory()
                                                 : op.homogeneous_guess();
    ConvergenceReport rep;
    rep.tol = tol;
    for (int it = 1; it <= max_iter; ++it) {
        Trajectory zn = op.apply(z);
        double d = pc_diff_norm(zn, z);
        rep.diff_norms.push_back(d);
        if (rep.diff_norms.size() >= 2) {
            double prev = rep.diff_norms[rep.diff_norms.size() - 2];
            if (prev > 0.0) rep.ratios.push_back(d / prev);
        }
        z = std::move(zn);
        rep.iterations = it;
        if (d < tol) {
            rep.converged = true;
            // impulse segments were driven by the previous iterate's left
            // limits; re-express them through the converged trajectory's own
            // limits so z(t) = phi_j(t, z(t_j^-)) holds exactly
            for (int j = 1; j <= spec.m(); ++j) {
                auto& seg = z.impulse_seg(j);
                const SpectralState& zl = z.left_limit(j);
                for (std::size_t i = 0; i < seg.nodes.size(); ++i)
                    seg.z[i] = spec.phi_apply(j, seg.nodes[i], zl);
            }
            return {std::move(z), std::move(rep)};
        }
    }
    throw non_convergence("solve: Picard iteration did not reach tol within max_iter "
                          "(contraction certificate likely fails)", std::move(rep));
}

/// Evaluate the mild-solution formula at an arbitrary time against the
/// sampled trajectory (which supplies the history). On the fixed point this
/// reproduces z(tt).
[[nodiscard]] inline SpectralState evaluate_formula_at(const ProblemSpec& spec,
                                                       const Trajectory& traj, double tt) {
    spec.validate();
    const auto& u = spec.partition.u;
    const auto& tp = spec.partition.t;
    const int m = spec.m();
    for (int j = 1; j <= m; ++j)
        if (tt > tp[static_cast<std::size_t>(j)] && tt <= u[static_cast<std::size_t>(j)])
            return spec.phi_apply(j, tt, traj.left_limit(j));
    int j = -1;
    for (int jj = 0; jj <= m; ++jj)
        if (tt > u[static_cast<std::size_t>(jj)] && tt <= tp[static_cast<std::size_t>(jj) + 1]) { j = jj; break; }
    if (j < 0) throw std::domain_error("evaluate_formula_at: t outside (0, a]");

    XiOperator op(spec, traj.mesh);
    const auto& seg = traj.solve_seg(j);
    resolvent::SampledStates g;
    g.left = u[static_cast<std::size_t>(j)];
    g.t = seg.nodes;
    g.singular_exponent = 2.0 - spec.beta;
    g.z.reserve(seg.nodes.size());
    SpectralState hval(spec.modes());
    for (std::size_t i = 0; i < seg.nodes.size(); ++i) {
        spec.h.apply(seg.nodes[i], seg.z[i], hval);
        SpectralState gi = hval;
        if (j >= 1) gi -= op.phi_at(j, seg.nodes[i], traj);
        g.z.push_back(std::move(gi));
    }
    SpectralState lead = (j == 0) ? spec.z0 : op.impulse_average(j, traj.left_limit(j));
    double T = tt - u[static_cast<std::size_t>(j)];
    SpectralState out = resolvent::double_convolution(op.rparams(), g.left, tt, g);
    const auto& rp = op.rparams();
    for (std::size_t md = 0; md < spec.modes(); ++md)
        out.c[md] += rp.rho(T, md) * lead.c[md]
                     + rp.iota(T, md) * spec.ztilde[static_cast<std::size_t>(j)].c[md];
    return out;
}

/// Per-segment residual of the governing equation on interior mesh nodes:
/// weighted norm of D^beta z - [A z + h - Phi_j] with the derivative taken
/// from the local lower limit u_j.
struct SegmentResidual {
    int j = 0;
    double max_weighted = 0.0;
    int evaluated = 0;
    int excluded = 0;
};

struct ResidualReport {
    double max_weighted = 0.0;
    std::vector<SegmentResidual> segments;
};

[[nodiscard]] inline ResidualReport residual_check(const ProblemSpec& spec,
                                                   const Trajectory& traj) {
    spec.validate();
    const int m = spec.m();
    const std::size_t nmod = spec.modes();
    const double beta = spec.beta;

    // meshes as the trajectory carries them
    std::vector<std::vector<double>> solve_nodes(static_cast<std::size_t>(m) + 1);
    for (int j = 0; j <= m; ++j) solve_nodes[static_cast<std::size_t>(j)] = traj.solve_seg(j).nodes;
    std::vector<std::vector<double>> imp_ext(static_cast<std::size_t>(std::max(m, 0)));
    for (int j = 1; j <= m; ++j) {
        const auto& seg = traj.impulse_seg(j);
        std::vector<double> e;
        e.reserve(seg.nodes.size() + 1);
        e.push_back(seg.left);
        e.insert(e.end(), seg.nodes.begin(), seg.nodes.end());
        imp_ext[static_cast<std::size_t>(j) - 1] = std::move(e);
    }

    ResidualReport rep;
    SpectralState hval(nmod);
    for (int j = 0; j <= m; ++j) {
        const auto& seg = traj.solve_seg(j);
        const double uj = seg.left;
        const std::size_t n = seg.nodes.size();
        SegmentResidual sr;
        sr.j = j;

        std::vector<fraccalc::SampledFn> fk(nmod);
        for (std::size_t md = 0; md < nmod; ++md) {
            fk[md].t0 = uj;
            fk[md].t = seg.nodes;
            fk[md].v.resize(n);
            for (std::size_t i = 0; i < n; ++i) fk[md].v[i] = seg.z[i].c[md];
            fk[md].singular_exponent = 2.0 - beta;
        }

        // nodes inside the lower-limit model-fit zone are not trustworthy for
        // the derivative and count as excluded, as does the endpoint
        const std::size_t i_lo = std::max<std::size_t>(8, n / 16);
        for (std::size_t i = i_lo; i + 1 < n; ++i) {
            const double ti = seg.nodes[i];
            SpectralState defect(nmod);
            bool ok = true;
            SpectralState phi(nmod);
            if (j >= 1) {
                auto row = detail::build_phi_row(spec, solve_nodes, imp_ext, j, ti);
                for (int k = 0; k < j; ++k) {
                    const auto& w = row.wz[static_cast<std::size_t>(k)];
                    const auto& hist = traj.solve_seg(k).z;
                    for (std::size_t l = 0; l < w.size(); ++l)
                        for (std::size_t md = 0; md < nmod; ++md)
                            phi.c[md] += w[l] * hist[l].c[md];
                }
                for (int q = 1; q < j; ++q) {
                    const auto& w = row.wimp[static_cast<std::size_t>(q) - 1];
                    const auto& e = imp_ext[static_cast<std::size_t>(q) - 1];
                    const SpectralState& zq = traj.left_limit(q);
                    for (std::size_t l = 0; l < w.size(); ++l) {
                        if (w[l] == 0.0) continue;
                        SpectralState v = spec.phi_apply(q, e[l], zq);
                        for (std::size_t md = 0; md < nmod; ++md) phi.c[md] += w[l] * v.c[md];
                    }
                }
                const auto& e = imp_ext[static_cast<std::size_t>(j) - 1];
                const SpectralState& zl = traj.left_limit(j);
                for (std::size_t l = 0; l < row.wpsi.size(); ++l) {
                    if (row.wpsi[l] == 0.0) continue;
                    SpectralState v = spec.psi_apply(j, e[l], zl);
                    for (std::size_t md = 0; md < nmod; ++md)
                        phi.c[md] += row.wpsi[l] * v.c[md];
                }
            }
            spec.h.apply(ti, seg.z[i], hval);
            for (std::size_t md = 0; md < nmod; ++md) {
                double d;
                try {
                    d = fraccalc::rl_derivative(fk[md], beta, ti);
                } catch (const stencil_error&) {
                    ok = false;
                    break;
                }
                double rhs = spec.op.eigenvalues[md] * seg.z[i].c[md] + hval.c[md] - phi.c[md];
                defect.c[md] = d - rhs;
            }
            if (!ok) {
                ++sr.excluded;
                continue;
            }
            ++sr.evaluated;
            double wnorm = std::pow(ti - uj, 2.0 - beta) * defect.norm();
            sr.max_weighted = std::max(sr.max_weighted, wnorm);
        }
        sr.excluded += static_cast<int>(i_lo) + 1;
        rep.max_weighted = std::max(rep.max_weighted, sr.max_weighted);
        rep.segments.push_back(sr);
    }
    return rep;
}

} // namespace fracevol::mild
