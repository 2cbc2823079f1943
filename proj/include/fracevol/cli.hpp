#pragma once

// Command front-end: solve / check / verify-identities / reproduce-example.
// Exit codes: 0 success, 1 assumption failure (a solve is still attempted
// and flagged), 2 parse or numerical error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fracevol/analysis.hpp"
#include "fracevol/mild.hpp"
#include "fracevol/preset.hpp"
#include "fracevol/problem_io.hpp"

namespace fracevol::cli {

struct RunConfig {
    std::string command;       // solve | check | verify-identities | reproduce-example
    std::string problem_path;
    std::string out_dir;
    double tol = 1e-8;
    int max_iter = 200;
    int mesh_nodes = 256;
    double grading = 2.0;
    int modes = 0;             // 0: as given by the problem document
    int physical_grid = 0;     // 0: spectral columns in the CSV
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

inline void write_json(const std::filesystem::path& p, const ordered_json& j) {
    write_text(p, j.dump(2) + "\n");
}

inline void override_modes(ProblemSpec& spec, int modes) {
    if (modes <= 0 || modes == static_cast<int>(spec.modes())) return;
    spec.op = resolvent::SpectralOperator::dirichlet_laplacian(modes);
    const std::size_t n = static_cast<std::size_t>(modes);
    spec.z0.c.resize(n, 0.0);
    for (auto& z : spec.ztilde) z.c.resize(n, 0.0);
    for (auto& p : spec.psi)
        if (p.kind == mild::ImpulseKind::Constant) p.value.resize(n, 0.0);
}

inline double estimate_lambda_R_default(const ProblemSpec& spec) {
    resolvent::ResolventParams rp(spec.beta, spec.op);
    fraccalc::GradedMesh grid(0.0, spec.partition.a(), 256, 2.0);
    auto nodes = grid.sample_nodes();
    return resolvent::estimate_lambda_R(rp, nodes);
}

inline mild::MeshConfig mesh_from_config(const RunConfig& cfg) {
    mild::MeshConfig mesh;
    mesh.solve_nodes = cfg.mesh_nodes;
    mesh.impulse_nodes = std::max(8, cfg.mesh_nodes / 4);
    mesh.grading = cfg.grading;
    return mesh;
}

struct IdentityRow {
    std::string name;
    double max_defect = 0.0;
    double tolerance = 0.0;
    [[nodiscard]] bool pass() const { return max_defect <= tolerance; }
};

/// The closed-form identity suite exposed through `verify-identities`.
[[nodiscard]] inline std::vector<IdentityRow> run_identity_suite() {
    std::vector<IdentityRow> rows;
    const double alphas[] = {0.5, 1.0, 1.5, 2.0, 3.0};
    const double orders[] = {0.3, 0.7, 1.2, 1.8};
    const double tpts[] = {0.35, 0.8, 1.0};

    {
        IdentityRow r{"fractional_integral_power_law", 0.0, 1e-4};
        for (double a : alphas) {
            fraccalc::GradedMesh mesh(0.0, 1.0, 1024, 2.0);
            auto f = fraccalc::SampledFn::sample(
                mesh, [a](double x) { return std::pow(x, a - 1.0); },
                std::max(0.0, 1.0 - a));
            for (double mu : orders)
                for (double tt : tpts) {
                    double want = fraccalc::power_integral_exact(a, mu, 0.0, tt);
                    double got = fraccalc::rl_integral(f, mu, tt);
                    r.max_defect = std::max(r.max_defect,
                                            std::abs(got - want) / std::abs(want));
                }
        }
        rows.push_back(r);
    }
    {
        IdentityRow r{"fractional_derivative_power_law", 0.0, 1e-4};
        for (double a : alphas) {
            fraccalc::GradedMesh mesh(0.0, 1.0, 1024, 2.0);
            auto f = fraccalc::SampledFn::sample(
                mesh, [a](double x) { return std::pow(x, a - 1.0); },
                std::max(0.0, 1.0 - a));
            for (double mu : orders)
                for (double tt : tpts) {
                    double want = fraccalc::power_integral_exact(a, -mu, 0.0, tt);
                    double got = fraccalc::rl_derivative(f, mu, tt);
                    double d = (want == 0.0) ? std::abs(got) * 1e4
                                             : std::abs(got - want) / std::abs(want);
                    r.max_defect = std::max(r.max_defect, d);
                }
        }
        rows.push_back(r);
    }
    {
        IdentityRow r{"fractional_integral_semigroup", 0.0, 2e-4};
        fraccalc::GradedMesh mesh(0.0, 1.0, 512, 2.0);
        for (double a : {1.5, 3.0}) {
            auto f = fraccalc::SampledFn::sample(
                mesh, [a](double x) { return std::pow(x, a - 1.0); });
            for (auto [p, q] : {std::pair{0.3, 0.4}, {0.6, 0.3}}) {
                fraccalc::SampledFn inner;
                inner.t0 = 0.0;
                inner.t = f.t;
                for (double tt : f.t) inner.v.push_back(fraccalc::rl_integral(f, q, tt));
                double lhs = fraccalc::rl_integral(inner, p, 1.0);
                double rhs = fraccalc::rl_integral(f, p + q, 1.0);
                r.max_defect = std::max(r.max_defect, std::abs(lhs - rhs) / std::abs(rhs));
            }
        }
        rows.push_back(r);
    }

    resolvent::ResolventParams rp(1.5, resolvent::SpectralOperator::dirichlet_laplacian(5));
    {
        IdentityRow r{"resolvent_time_integral", 0.0, 1e-6};
        for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{4}})
            for (double tt : {0.1, 0.5, 1.0}) {
                fraccalc::GradedMesh mesh(0.0, tt, 8192, 2.0);
                auto f = fraccalc::SampledFn::sample(
                    mesh, [&](double x) { return rp.rho(x, k); }, 0.5);
                double quad = fraccalc::rl_integral(f, 1.0, tt);
                double closed = rp.iota(tt, k);
                r.max_defect = std::max(r.max_defect,
                                        std::abs(quad - closed) / std::abs(closed));
            }
        rows.push_back(r);
    }
    {
        IdentityRow r{"resolvent_beta_integral", 0.0, 1e-6};
        for (std::size_t k : {std::size_t{0}, std::size_t{2}})
            for (double tt : {0.4, 0.9}) {
                fraccalc::GradedMesh mesh(0.0, tt, 8192, 2.0);
                auto f = fraccalc::SampledFn::sample(
                    mesh, [&](double x) { return rp.rho(x, k); }, 0.5);
                double quad = fraccalc::rl_integral(f, 1.5, tt);
                double closed = rp.frac_integral(tt, k);
                r.max_defect = std::max(r.max_defect,
                                        std::abs(quad - closed) / std::abs(closed));
            }
        rows.push_back(r);
    }
    {
        IdentityRow r{"resolvent_functional_equation", 0.0, 1e-6};
        resolvent::SpectralState w(5);
        for (double& x : w.c) x = 1.0;
        for (double rr : {0.3, 0.8})
            for (double tt : {0.3, 0.8})
                r.max_defect = std::max(r.max_defect,
                                        resolvent::resolvent_axiom_check(rp, rr, tt, w));
        rows.push_back(r);
    }
    {
        IdentityRow r{"resolvent_generator_identity", 0.0, 1e-6};
        for (double tt : {0.3, 1.0})
            for (std::size_t k : {std::size_t{0}, std::size_t{4}}) {
                double lhs = rp.rho(tt, k);
                double rhs = std::pow(tt, -0.5) / special::gamma_fn(0.5)
                             + rp.eigenvalue(k) * rp.frac_integral(tt, k);
                r.max_defect = std::max(r.max_defect, std::abs(lhs - rhs) / std::abs(lhs));
            }
        rows.push_back(r);
    }
    {
        IdentityRow r{"resolvent_limit_axiom", 0.0, 1e-3};
        resolvent::ResolventParams rp16(1.5,
                                        resolvent::SpectralOperator::dirichlet_laplacian(16));
        resolvent::SpectralState z(16);
        for (std::size_t k = 0; k < 16; ++k) z.c[k] = 1.0 / ((k + 1.0) * (k + 1.0));
        double gb = special::gamma_fn(0.5);
        auto v = resolvent::resolvent_apply(rp16, 1e-4, z);
        v *= gb * std::pow(1e-4, 0.5);
        r.max_defect = (v - z).norm() / z.norm();
        rows.push_back(r);
    }
    return rows;
}

} // namespace detail

/// Execute one command. Returns the process exit status.
[[nodiscard]] inline int run(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    auto diagnostic = [](const std::string& kind, const std::string& what) {
        ordered_json d;
        d["error"] = kind;
        d["what"] = what;
        std::cerr << d.dump() << "\n";
    };
    try {
        if (cfg.command == "verify-identities") {
            auto rows = detail::run_identity_suite();
            ordered_json out = ordered_json::array();
            bool all = true;
            for (const auto& r : rows) {
                std::printf("[%s] %-34s max_defect=%.3e tol=%.1e\n",
                            r.pass() ? "PASS" : "FAIL", r.name.c_str(), r.max_defect,
                            r.tolerance);
                ordered_json row;
                row["name"] = r.name;
                row["max_defect"] = r.max_defect;
                row["tolerance"] = r.tolerance;
                row["pass"] = r.pass();
                out.push_back(row);
                all = all && r.pass();
            }
            if (!cfg.out_dir.empty()) {
                fs::create_directories(cfg.out_dir);
                detail::write_json(fs::path(cfg.out_dir) / "identities.json", out);
            }
            return all ? 0 : 2;
        }

        ProblemSpec spec;
        if (cfg.command == "reproduce-example") {
            spec = dirichlet_impulse_example(0.5, cfg.modes > 0 ? cfg.modes : 32);
        } else {
            if (cfg.problem_path.empty()) {
                diagnostic("usage", "a problem file is required (--problem PATH)");
                return 2;
            }
            spec = parse_problem(cfg.problem_path);
            detail::override_modes(spec, cfg.modes);
        }

        const double lambda_R = detail::estimate_lambda_R_default(spec);
        auto contraction = analysis::contraction_constant(spec, lambda_R, true);
        auto assumptions = analysis::assumption_checklist(spec, lambda_R);

        if (cfg.command == "check") {
            if (cfg.out_dir.empty()) {
                diagnostic("usage", "an output directory is required (--out DIR)");
                return 2;
            }
            fs::create_directories(cfg.out_dir);
            detail::write_json(fs::path(cfg.out_dir) / "contraction.json",
                               contraction_to_json(contraction));
            detail::write_json(fs::path(cfg.out_dir) / "assumptions.json",
                               assumptions_to_json(assumptions));
            std::printf("c = %.6g (%s)\n", contraction.c,
                        assumptions.overall ? "assumptions pass" : "assumption failure");
            return assumptions.overall ? 0 : 1;
        }

        if (cfg.command == "solve" || cfg.command == "reproduce-example") {
            if (cfg.out_dir.empty()) {
                diagnostic("usage", "an output directory is required (--out DIR)");
                return 2;
            }
            fs::create_directories(cfg.out_dir);
            const fs::path out(cfg.out_dir);
            detail::write_json(out / "contraction.json", contraction_to_json(contraction));
            if (cfg.command == "reproduce-example") {
                detail::write_json(out / "problem.json", problem_to_json(spec));
                detail::write_json(out / "assumptions.json",
                                   assumptions_to_json(assumptions));
            }
            if (!assumptions.overall)
                std::printf("warning: assumption failure (c = %.6g); solving anyway\n",
                            contraction.c);

            mild::MeshConfig mesh = detail::mesh_from_config(cfg);
            mild::ConvergenceReport report;
            bool numerical_failure = false;
            try {
                auto result = mild::solve(spec, cfg.tol, cfg.max_iter, mesh);
                report = result.report;
                std::ofstream csv(out / "trajectory.csv");
                write_trajectory_csv(csv, result.trajectory, cfg.physical_grid);
                if (cfg.command == "reproduce-example") {
                    auto rr = mild::residual_check(spec, result.trajectory);
                    detail::write_json(out / "residual.json", residual_to_json(rr));
                    std::printf("weighted residual %.3e\n", rr.max_weighted);
                }
            } catch (const mild::non_convergence& e) {
                report = e.report;
                numerical_failure = true;
                diagnostic("non_convergence", e.what());
            }
            detail::write_json(out / "convergence.json", convergence_to_json(report));
            std::printf("iterations %d, converged %s, c = %.6g\n", report.iterations,
                        report.converged ? "yes" : "no", contraction.c);
            if (!assumptions.overall) return 1;
            return numerical_failure ? 2 : 0;
        }

        diagnostic("usage", "unknown command '" + cfg.command + "'");
        return 2;
    } catch (const parse_error& e) {
        diagnostic("parse_error", e.what());
        return 2;
    } catch (const validation_error& e) {
        diagnostic("validation_error", e.what());
        return 2;
    } catch (const std::exception& e) {
        diagnostic("error", e.what());
        return 2;
    }
}

} // namespace fracevol::cli
