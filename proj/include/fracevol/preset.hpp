#pragma once

// Built-in example problem: heat-type generator (Dirichlet Laplacian on
// [0, pi], sine eigenbasis) with three non-instantaneous impulses inside
// [0, 1]. The solve intervals are kept short relative to the rests after the
// impulses; the history term of the contraction constant is geometric and
// only such timetables keep it below one. The coupling scale delta drives
// the remaining terms, with c in the contraction band near 0.48 at the
// default delta = 0.5.

#include "fracevol/mild.hpp"

namespace fracevol::cli {

[[nodiscard]] inline mild::ProblemSpec dirichlet_impulse_example(double delta = 0.5,
                                                                 int modes = 32) {
    mild::ProblemSpec spec;
    spec.beta = 1.5;
    spec.partition = mild::Partition::make({0.0, 0.32, 0.64, 0.96, 1.0},
                                           {0.02, 0.34, 0.66, 1.0});
    spec.op = resolvent::SpectralOperator::dirichlet_laplacian(modes);
    const std::size_t n = static_cast<std::size_t>(modes);
    spec.z0 = resolvent::SpectralState(n);
    for (std::size_t k = 0; k < n; ++k) spec.z0.c[k] = 1.0 / ((k + 1.0) * (k + 1.0));
    for (int j = 0; j <= spec.m(); ++j) {
        resolvent::SpectralState zt(n);
        for (std::size_t k = 0; k < n; ++k) zt.c[k] = 0.3 / ((k + 1.0) * (k + 1.0));
        spec.ztilde.push_back(std::move(zt));
    }
    spec.h = mild::Nonlinearity::linear(delta);
    for (int j = 1; j <= spec.m(); ++j)
        spec.psi.push_back(mild::ImpulsePsi::linear(delta));
    return spec;
}

} // namespace fracevol::cli
