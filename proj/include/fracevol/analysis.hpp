#pragma once

// Existence/uniqueness certificate: the five-term contraction constant per
// solve interval, its maximum over the timetable (including the first
// interval's own constant), and the assumption checklist the certificate
// rests on.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fracevol/mild.hpp"
#include "fracevol/special.hpp"

namespace fracevol::analysis {

using mild::Partition;
using mild::ProblemSpec;

struct IntervalTerms {
    int j = 0;
    double term1 = 0, term2 = 0, term3 = 0, term4 = 0, term5 = 0;
    double c_j = 0;
};

struct ContractionReport {
    double beta = 0;
    double lambda_R = 0;
    bool lambda_R_estimated = false;
    double lambda_h = 0;
    std::vector<double> lambda_phi;  // per impulse j = 1..m
    std::vector<double> lambda_psi;
    Partition partition;
    double case1_constant = 0;       // the j = 0 bound
    std::vector<IntervalTerms> intervals;
    double c = 0;
    bool verdict = false;            // c < 1
};

/// Evaluate the contraction constant with its per-term breakdown:
///   c_j = lamR lphi_j / (t_j - u_{j-1})^{2-b}
///       + lamR lh Gamma(b-1)^2 (t_{j+1} - u_j)^b / Gamma(2b-1)
///       + lamR/((b-1)Gamma(2-b)) sum_{k=0}^{j-1} ((t_{k+1}-u_k)/(u_j-t_{k+1}))^{b-1}
///       + lamR/(b Gamma(2-b)) sum_{k=0}^{j-2} lphi_{k+1}(t_{j+1}-u_j)^2
///             / ((t_{k+1}-u_k)^{2-b} (u_j-u_{k+1})^b)
///       + lamR lpsi_j (t_{j+1}-u_j)^2 / (Gamma(2-b)(t_j-u_{j-1})^{2-b}),
/// plus the first-interval constant lamR lh Gamma(b-1)^2 t_1^b / Gamma(2b-1);
/// c is the maximum over all of them. Empty sums are zero.
[[nodiscard]] inline ContractionReport contraction_constant(const ProblemSpec& spec,
                                                            double lambda_R,
                                                            bool lambda_R_estimated = false) {
    spec.validate();
    if (!(lambda_R > 0.0) || !std::isfinite(lambda_R))
        throw std::domain_error("contraction_constant: lambda_R must be finite and > 0");

    const double b = spec.beta;
    const auto& u = spec.partition.u;
    const auto& t = spec.partition.t;
    const int m = spec.m();
    const double g_bm1 = special::gamma_fn(b - 1.0);
    const double g_2bm1 = special::gamma_fn(2.0 * b - 1.0);
    const double g_2mb = special::gamma_fn(2.0 - b);

    ContractionReport rep;
    rep.beta = b;
    rep.lambda_R = lambda_R;
    rep.lambda_R_estimated = lambda_R_estimated;
    rep.lambda_h = spec.lambda_h();
    rep.partition = spec.partition;
    for (int j = 1; j <= m; ++j) {
        rep.lambda_phi.push_back(spec.lambda_phi(j));
        rep.lambda_psi.push_back(spec.lambda_psi(j));
    }

    rep.case1_constant = lambda_R * rep.lambda_h * g_bm1 * g_bm1
                         * std::pow(t[1], b) / g_2bm1;
    rep.c = rep.case1_constant;

    for (int j = 1; j <= m; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        IntervalTerms it;
        it.j = j;
        const double gap_prev = t[ju] - u[ju - 1];       // t_j - u_{j-1}
        const double len_j = t[ju + 1] - u[ju];          // t_{j+1} - u_j

        it.term1 = lambda_R * spec.lambda_phi(j) / std::pow(gap_prev, 2.0 - b);
        it.term2 = lambda_R * rep.lambda_h * g_bm1 * g_bm1 * std::pow(len_j, b) / g_2bm1;
        double s3 = 0.0;
        for (int k = 0; k <= j - 1; ++k) {
            const std::size_t ku = static_cast<std::size_t>(k);
            s3 += std::pow((t[ku + 1] - u[ku]) / (u[ju] - t[ku + 1]), b - 1.0);
        }
        it.term3 = lambda_R / ((b - 1.0) * g_2mb) * s3;
        double s4 = 0.0;
        for (int k = 0; k <= j - 2; ++k) {
            const std::size_t ku = static_cast<std::size_t>(k);
            s4 += spec.lambda_phi(k + 1) * len_j * len_j
                  / (std::pow(t[ku + 1] - u[ku], 2.0 - b) * std::pow(u[ju] - u[ku + 1], b));
        }
        it.term4 = lambda_R / (b * g_2mb) * s4;
        it.term5 = lambda_R * spec.lambda_psi(j) * len_j * len_j
                   / (g_2mb * std::pow(gap_prev, 2.0 - b));
        it.c_j = it.term1 + it.term2 + it.term3 + it.term4 + it.term5;
        rep.c = std::max(rep.c, it.c_j);
        rep.intervals.push_back(it);
    }
    rep.verdict = rep.c < 1.0;
    return rep;
}

struct AssumptionItem {
    std::string id;
    bool applicable = true;
    bool pass = false;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionItem> items;
    double c = 0.0;
    bool overall = false;
};

/// Pass/fail per assumption: the q diagnostic (when supplied), the certified
/// Lipschitz constants, the impulse factorization ranges, and the
/// contraction verdict.
[[nodiscard]] inline AssumptionReport assumption_checklist(const ProblemSpec& spec,
                                                           double lambda_R) {
    spec.validate();
    AssumptionReport rep;
    const int m = spec.m();

    {
        AssumptionItem a1{"A1", spec.q_diag.has_value(), true, ""};
        double bound = 1.0 / (2.0 - spec.beta);
        if (spec.q_diag) {
            a1.pass = *spec.q_diag < bound;
            a1.detail = "q = " + std::to_string(*spec.q_diag) + ", bound 1/(2-beta) = "
                        + std::to_string(bound);
        } else {
            a1.detail = "q not supplied; diagnostic only";
        }
        rep.items.push_back(a1);
    }
    {
        AssumptionItem a2{"A2", true, true, ""};
        double lh = spec.lambda_h();
        a2.pass = std::isfinite(lh) && lh >= 0.0;
        a2.detail = "catalog-certified lambda_h = " + std::to_string(lh);
        rep.items.push_back(a2);
    }
    bool psi_ok = true;
    {
        AssumptionItem a4{"A4", m > 0, true, ""};
        for (int j = 1; j <= m; ++j) {
            double lp = spec.lambda_psi(j);
            if (!(lp >= 0.0 && lp <= 1.0)) {
                a4.pass = false;
                a4.detail += "lambda_psi_" + std::to_string(j) + " = " + std::to_string(lp)
                             + " outside (0,1]; ";
            }
        }
        psi_ok = a4.pass;
        if (a4.pass) a4.detail = "phi_j = (u_j-t)^{1+beta} psi_j by construction";
        rep.items.push_back(std::move(a4));
    }
    {
        AssumptionItem a3{"A3", m > 0, psi_ok, ""};
        for (int j = 1; j <= m; ++j) {
            double lp = spec.lambda_phi(j);
            if (!(lp >= 0.0 && lp <= 1.0)) {
                a3.pass = false;
                a3.detail += "derived lambda_phi_" + std::to_string(j) + " = "
                             + std::to_string(lp) + " outside (0,1]; ";
            }
        }
        if (a3.pass && psi_ok) a3.detail = "derived lambda_phi within (0,1]";
        // order A3 before A4 in the report
        rep.items.insert(rep.items.end() - 1, std::move(a3));
    }
    {
        AssumptionItem a5{"A5", true, false, ""};
        auto cr = contraction_constant(spec, lambda_R);
        rep.c = cr.c;
        a5.pass = cr.verdict;
        a5.detail = "c = " + std::to_string(cr.c);
        rep.items.push_back(std::move(a5));
    }
    rep.overall = true;
    for (const auto& it : rep.items)
        if (it.applicable && !it.pass) rep.overall = false;
    return rep;
}

} // namespace fracevol::analysis
