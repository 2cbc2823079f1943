#include <catch2/catch_amalgamated.hpp>

#include "fracevol/analysis.hpp"

#include <cmath>
#include <random>

using namespace fracevol;
using namespace fracevol::analysis;
using namespace fracevol::mild;
using resolvent::SpectralOperator;
using resolvent::SpectralState;

namespace {

ProblemSpec make_spec(double beta, Partition part, double lam_h,
                      std::vector<double> lam_psi) {
    ProblemSpec spec;
    spec.beta = beta;
    spec.partition = std::move(part);
    int m = spec.m();
    spec.op = SpectralOperator::dirichlet_laplacian(2);
    spec.z0 = SpectralState(2);
    spec.ztilde.assign(static_cast<std::size_t>(m) + 1, SpectralState(2));
    spec.h = (lam_h == 0.0) ? Nonlinearity::zero() : Nonlinearity::linear(lam_h);
    for (int j = 1; j <= m; ++j) {
        double lp = lam_psi[static_cast<std::size_t>(j) - 1];
        spec.psi.push_back(lp == 0.0 ? ImpulsePsi::zero() : ImpulsePsi::linear(lp));
    }
    return spec;
}

// the timetable of the shipped example problem
Partition example_partition() {
    return Partition::make({0.0, 0.32, 0.64, 0.96, 1.0}, {0.02, 0.34, 0.66, 1.0});
}

} // namespace

TEST_CASE("contraction constant vanishes without nonlinearity or impulses",
          "[analysis]") {
    auto spec = make_spec(1.5, Partition::make({0.0, 1.0}, {1.0}), 0.0, {});
    auto rep = contraction_constant(spec, 0.6);
    CHECK(rep.c == 0.0);
    CHECK(rep.verdict);
    CHECK(rep.intervals.empty());
}

TEST_CASE("contraction constant single-interval closed form", "[analysis]") {
    const double beta = 1.5, lamR = 0.6, lamh = 0.8, t1 = 0.7;
    auto spec = make_spec(beta, Partition::make({0.0, t1}, {t1}), lamh, {});
    auto rep = contraction_constant(spec, lamR);
    double g = special::gamma_fn(beta - 1.0);
    double want = lamR * lamh * g * g * std::pow(t1, beta)
                  / special::gamma_fn(2.0 * beta - 1.0);
    CHECK(rep.c == Catch::Approx(want).epsilon(1e-15));
    CHECK(rep.case1_constant == rep.c);
}

TEST_CASE("contraction constant against the frozen scripted evaluation",
          "[analysis][oracle]") {
    // m = 3 partition inside [0,1], delta = 0.5, lambda_R = 1/Gamma(1/2);
    // reference values computed by an independent scripted evaluation of the
    // five-term formula ahead of the build
    auto spec = make_spec(1.5, example_partition(), 0.5, {0.5, 0.5, 0.5});
    const double lamR = 0.56418958354775628695;
    auto rep = contraction_constant(spec, lamR);
    REQUIRE(rep.intervals.size() == 3);
    CHECK(rep.case1_constant == Catch::Approx(0.0025066282746310005024).epsilon(1e-13));
    CHECK(rep.intervals[0].c_j == Catch::Approx(0.26566066360239661804).epsilon(1e-13));
    CHECK(rep.intervals[1].c_j == Catch::Approx(0.38008267455013326582).epsilon(1e-13));
    CHECK(rep.intervals[2].c_j == Catch::Approx(0.47923762303673188321).epsilon(1e-13));
    CHECK(rep.c == Catch::Approx(0.47923762303673188321).epsilon(1e-13));
    CHECK(rep.verdict);
}

TEST_CASE("contraction constant is monotone in every Lipschitz input",
          "[analysis][property]") {
    std::mt19937 rng(424242u);
    std::uniform_real_distribution<double> dbeta(1.1, 1.9);
    std::uniform_real_distribution<double> dlam(0.0, 1.0);
    std::uniform_real_distribution<double> dfac(1.01, 2.0);
    for (int rep_i = 0; rep_i < 100; ++rep_i) {
        double beta = dbeta(rng);
        auto base = make_spec(beta, example_partition(), dlam(rng),
                              {dlam(rng), dlam(rng), dlam(rng)});
        double lamR = 0.3 + dlam(rng);
        double c0 = contraction_constant(base, lamR).c;

        // bump one input at a time
        int which = static_cast<int>(rng() % 5);
        auto bumped = base;
        double lamR2 = lamR;
        double f = dfac(rng);
        switch (which) {
            case 0: bumped.h.gain *= f; break;
            case 1: bumped.psi[0].gain *= f; break;
            case 2: bumped.psi[1].gain *= f; break;
            case 3: bumped.psi[2].gain *= f; break;
            default: lamR2 = lamR * f; break;
        }
        double c1 = contraction_constant(bumped, lamR2).c;
        CAPTURE(rep_i, which, beta, f);
        CHECK(c1 >= c0);
    }
}

TEST_CASE("doubling lambda_h moves exactly the nonlinearity terms",
          "[analysis][property]") {
    auto spec = make_spec(1.4, example_partition(), 0.3, {0.4, 0.2, 0.6});
    auto a = contraction_constant(spec, 0.7);
    auto b_spec = spec;
    b_spec.h.gain = 0.6;
    auto b = contraction_constant(b_spec, 0.7);
    CHECK(b.case1_constant == 2.0 * a.case1_constant);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(b.intervals[j].term2 == 2.0 * a.intervals[j].term2);
        CHECK(b.intervals[j].term1 == a.intervals[j].term1);
        CHECK(b.intervals[j].term3 == a.intervals[j].term3);
        CHECK(b.intervals[j].term4 == a.intervals[j].term4);
        CHECK(b.intervals[j].term5 == a.intervals[j].term5);
    }
}

TEST_CASE("contraction constant input guards", "[analysis]") {
    auto spec = make_spec(1.5, example_partition(), 0.5, {0.5, 0.5, 0.5});
    CHECK_THROWS_AS(contraction_constant(spec, 0.0), std::domain_error);
    CHECK_THROWS_AS(contraction_constant(spec, -1.0), std::domain_error);
}

TEST_CASE("assumption checklist on the zero problem", "[analysis]") {
    auto spec = make_spec(1.5, Partition::make({0.0, 1.0}, {1.0}), 0.0, {});
    auto rep = assumption_checklist(spec, 0.6);
    CHECK(rep.overall);
    CHECK(rep.c == 0.0);
    for (const auto& item : rep.items)
        if (item.applicable) CHECK(item.pass);

    // with impulses the history term of c is purely geometric: it survives
    // zero Lipschitz constants but the checklist still passes when c < 1
    auto spec_m3 = make_spec(1.5, example_partition(), 0.0, {0.0, 0.0, 0.0});
    auto rep_m3 = assumption_checklist(spec_m3, 0.6);
    CHECK(rep_m3.c > 0.0);
    CHECK(rep_m3.overall);
}

TEST_CASE("assumption checklist flags out-of-range impulse constants",
          "[analysis]") {
    auto spec = make_spec(1.5, example_partition(), 0.1, {1.5, 0.5, 0.5});
    auto rep = assumption_checklist(spec, 0.6);
    CHECK_FALSE(rep.overall);
    bool a3_fail = false, a4_fail = false;
    for (const auto& item : rep.items) {
        if (item.id == "A3") a3_fail = !item.pass;
        if (item.id == "A4") a4_fail = !item.pass;
    }
    CHECK(a3_fail);
    CHECK(a4_fail);
}

TEST_CASE("certificate bounds the observed Picard rate", "[analysis][property]") {
    // cross-module: whenever the verdict holds, every empirical contraction
    // ratio stays below c + 0.05
    ProblemSpec spec;
    spec.beta = 1.5;
    spec.partition = Partition::make({0.0, 0.32, 0.64}, {0.02, 0.64});
    spec.op = SpectralOperator::dirichlet_laplacian(4);
    spec.z0 = SpectralState(4);
    spec.ztilde.assign(2, SpectralState(4));
    for (std::size_t k = 0; k < 4; ++k) {
        spec.z0.c[k] = 1.0 / ((k + 1.0) * (k + 1.0));
        for (auto& zt : spec.ztilde) zt.c[k] = 0.3 / ((k + 1.0) * (k + 1.0));
    }
    spec.h = Nonlinearity::linear(0.4);
    spec.psi = {ImpulsePsi::linear(0.4)};

    resolvent::ResolventParams rp(spec.beta, spec.op);
    fraccalc::GradedMesh grid(0.0, 1.0, 128, 2.0);
    auto nodes = grid.sample_nodes();
    double lamR = resolvent::estimate_lambda_R(rp, nodes);
    auto rep = contraction_constant(spec, lamR, true);
    REQUIRE(rep.verdict);

    auto res = mild::solve(spec, 1e-9, 100, {96, 32, 2.0});
    CHECK(res.report.converged);
    for (double r : res.report.ratios) CHECK(r <= rep.c + 0.05);
}

TEST_CASE("assumption checklist passes for small coupling", "[analysis]") {
    // the certificate holds when the coupling scale is close enough to zero
    auto spec = make_spec(1.5, example_partition(), 0.5, {0.5, 0.5, 0.5});
    auto rep = assumption_checklist(spec, 0.56418958354775628695);
    CHECK(rep.overall);
    CHECK(rep.c < 1.0);

    // the q diagnostic participates only when supplied
    auto spec_q = spec;
    spec_q.q_diag = 1.9;  // bound is 1/(2-1.5) = 2
    CHECK(assumption_checklist(spec_q, 0.6).overall);
    spec_q.q_diag = 2.5;
    CHECK_FALSE(assumption_checklist(spec_q, 0.6).overall);
}
