#pragma once

// JSON problem documents and report serialization. Key order is fixed so
// identical runs produce byte-identical artifacts.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracevol/analysis.hpp"
#include "fracevol/mild.hpp"

namespace fracevol::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using mild::ProblemSpec;

namespace detail {

inline std::vector<double> number_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw parse_error("expected an array of numbers", path);
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw parse_error("expected a number", path);
        out.push_back(x.get<double>());
    }
    return out;
}

inline std::vector<double> padded_coeffs(const json& j, std::size_t n,
                                         const std::string& path) {
    auto v = number_array(j, path);
    if (v.size() > n)
        throw parse_error("more coefficients than modes", path);
    v.resize(n, 0.0);
    return v;
}

inline mild::Nonlinearity nonlin_from_json(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("kind"))
        throw parse_error("nonlinearity needs a 'kind'", path);
    auto kind = mild::Nonlinearity::kind_from_name(j.at("kind").get<std::string>());
    json params = j.value("params", json::object());
    switch (kind) {
        case mild::NonlinKind::Zero:
            return mild::Nonlinearity::zero();
        case mild::NonlinKind::Linear:
            return mild::Nonlinearity::linear(params.at("gain").get<double>());
        case mild::NonlinKind::Sine:
            return mild::Nonlinearity::sine(params.at("amp").get<double>());
        case mild::NonlinKind::LinearTimeMod:
            return mild::Nonlinearity::linear_tmod(params.at("gain").get<double>(),
                                                   params.at("omega").get<double>());
    }
    throw parse_error("unhandled nonlinearity kind", path);
}

inline mild::ImpulsePsi impulse_from_json(const json& j, std::size_t modes,
                                          const std::string& path) {
    if (!j.is_object() || !j.contains("kind"))
        throw parse_error("impulse needs a 'kind'", path);
    auto kind = mild::ImpulsePsi::kind_from_name(j.at("kind").get<std::string>());
    json params = j.value("params", json::object());
    switch (kind) {
        case mild::ImpulseKind::Zero:
            return mild::ImpulsePsi::zero();
        case mild::ImpulseKind::Constant:
            return mild::ImpulsePsi::constant(
                padded_coeffs(params.at("value"), modes, path + ".params.value"));
        case mild::ImpulseKind::Linear:
            return mild::ImpulsePsi::linear(params.at("gain").get<double>());
        case mild::ImpulseKind::Sine:
            return mild::ImpulsePsi::sine(params.at("amp").get<double>());
        case mild::ImpulseKind::LinearTimeMod:
            return mild::ImpulsePsi::linear_tmod(params.at("gain").get<double>(),
                                                 params.at("omega").get<double>());
    }
    throw parse_error("unhandled impulse kind", path);
}

inline ordered_json nonlin_to_json(const mild::Nonlinearity& h) {
    ordered_json out;
    out["kind"] = h.kind_name();
    ordered_json params = ordered_json::object();
    switch (h.kind) {
        case mild::NonlinKind::Zero: break;
        case mild::NonlinKind::Linear: params["gain"] = h.gain; break;
        case mild::NonlinKind::Sine: params["amp"] = h.gain; break;
        case mild::NonlinKind::LinearTimeMod:
            params["gain"] = h.gain;
            params["omega"] = h.omega;
            break;
    }
    out["params"] = params;
    return out;
}

inline ordered_json impulse_to_json(const mild::ImpulsePsi& p) {
    ordered_json out;
    out["kind"] = p.kind_name();
    ordered_json params = ordered_json::object();
    switch (p.kind) {
        case mild::ImpulseKind::Zero: break;
        case mild::ImpulseKind::Constant: params["value"] = p.value; break;
        case mild::ImpulseKind::Linear: params["gain"] = p.gain; break;
        case mild::ImpulseKind::Sine: params["amp"] = p.gain; break;
        case mild::ImpulseKind::LinearTimeMod:
            params["gain"] = p.gain;
            params["omega"] = p.omega;
            break;
    }
    out["params"] = params;
    return out;
}

} // namespace detail

/// Parse a problem document. Structural violations surface as parse_error
/// (with the JSON path) or validation_error (quoting the offending pair);
/// assumption-range checks are left to the checklist.
[[nodiscard]] inline ProblemSpec parse_problem_json(const json& doc) {
    if (!doc.is_object()) throw parse_error("problem document must be an object", "$");
    ProblemSpec spec;
    try {
        spec.beta = doc.at("beta").get<double>();
    } catch (const json::exception&) {
        throw parse_error("missing or invalid 'beta'", "$.beta");
    }
    if (!doc.contains("partition") || !doc["partition"].is_object())
        throw parse_error("missing 'partition' object", "$.partition");
    auto u = detail::number_array(doc["partition"].value("u", json::array()),
                                  "$.partition.u");
    auto t = detail::number_array(doc["partition"].value("t", json::array()),
                                  "$.partition.t");
    if (u.size() < 2 || t.size() + 1 != u.size())
        throw parse_error("partition needs u_0..u_{m+1} and t_1..t_{m+1}",
                          "$.partition");
    spec.partition = mild::Partition::make(std::move(u), std::move(t));

    int modes = 0;
    try {
        modes = doc.at("modes").get<int>();
    } catch (const json::exception&) {
        throw parse_error("missing or invalid 'modes'", "$.modes");
    }
    if (modes < 1) throw parse_error("'modes' must be >= 1", "$.modes");
    spec.op = resolvent::SpectralOperator::dirichlet_laplacian(modes);

    const std::size_t n = static_cast<std::size_t>(modes);
    if (!doc.contains("z0")) throw parse_error("missing 'z0'", "$.z0");
    spec.z0 = resolvent::SpectralState(detail::padded_coeffs(doc["z0"], n, "$.z0"));

    const int m = spec.m();
    if (!doc.contains("ztilde") || !doc["ztilde"].is_array()
        || doc["ztilde"].size() != static_cast<std::size_t>(m + 1))
        throw parse_error("'ztilde' must hold m+1 coefficient arrays", "$.ztilde");
    for (std::size_t j = 0; j < doc["ztilde"].size(); ++j)
        spec.ztilde.emplace_back(detail::padded_coeffs(
            doc["ztilde"][j], n, "$.ztilde[" + std::to_string(j) + "]"));

    if (!doc.contains("h")) throw parse_error("missing 'h'", "$.h");
    try {
        spec.h = detail::nonlin_from_json(doc["h"], "$.h");
    } catch (const json::exception& e) {
        throw parse_error(std::string("invalid nonlinearity: ") + e.what(), "$.h");
    }

    json imps = doc.value("impulses", json::array());
    if (!imps.is_array() || imps.size() != static_cast<std::size_t>(m))
        throw parse_error("'impulses' must hold one entry per impulse interval",
                          "$.impulses");
    for (std::size_t j = 0; j < imps.size(); ++j) {
        try {
            spec.psi.push_back(detail::impulse_from_json(
                imps[j], n, "$.impulses[" + std::to_string(j) + "]"));
        } catch (const json::exception& e) {
            throw parse_error(std::string("invalid impulse: ") + e.what(),
                              "$.impulses[" + std::to_string(j) + "]");
        }
    }

    if (doc.contains("q")) {
        if (!doc["q"].is_number()) throw parse_error("'q' must be a number", "$.q");
        spec.q_diag = doc["q"].get<double>();
    }
    spec.validate();
    return spec;
}

[[nodiscard]] inline ProblemSpec parse_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open problem file", path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw parse_error(std::string("malformed JSON: ") + e.what(), path);
    }
    return parse_problem_json(doc);
}

[[nodiscard]] inline ordered_json problem_to_json(const ProblemSpec& spec) {
    ordered_json out;
    out["beta"] = spec.beta;
    ordered_json part;
    part["u"] = spec.partition.u;
    part["t"] = std::vector<double>(spec.partition.t.begin() + 1, spec.partition.t.end());
    out["partition"] = part;
    out["modes"] = static_cast<int>(spec.modes());
    out["z0"] = spec.z0.c;
    ordered_json zt = ordered_json::array();
    for (const auto& z : spec.ztilde) zt.push_back(z.c);
    out["ztilde"] = zt;
    out["h"] = detail::nonlin_to_json(spec.h);
    ordered_json imps = ordered_json::array();
    for (const auto& p : spec.psi) imps.push_back(detail::impulse_to_json(p));
    out["impulses"] = imps;
    if (spec.q_diag) out["q"] = *spec.q_diag;
    return out;
}

[[nodiscard]] inline ordered_json contraction_to_json(const analysis::ContractionReport& r) {
    ordered_json out;
    out["beta"] = r.beta;
    out["lambda_R"] = r.lambda_R;
    out["lambda_R_source"] = r.lambda_R_estimated ? "estimated" : "supplied";
    out["lambda_h"] = r.lambda_h;
    out["lambda_phi"] = r.lambda_phi;
    out["lambda_psi"] = r.lambda_psi;
    out["case1_constant"] = r.case1_constant;
    ordered_json terms = ordered_json::array();
    for (const auto& it : r.intervals) {
        ordered_json row;
        row["j"] = it.j;
        row["term1"] = it.term1;
        row["term2"] = it.term2;
        row["term3"] = it.term3;
        row["term4"] = it.term4;
        row["term5"] = it.term5;
        row["c_j"] = it.c_j;
        terms.push_back(row);
    }
    out["intervals"] = terms;
    out["c"] = r.c;
    out["verdict"] = r.verdict;
    return out;
}

[[nodiscard]] inline ordered_json assumptions_to_json(const analysis::AssumptionReport& r) {
    ordered_json out;
    ordered_json items = ordered_json::array();
    for (const auto& it : r.items) {
        ordered_json row;
        row["id"] = it.id;
        row["applicable"] = it.applicable;
        row["pass"] = it.pass;
        row["detail"] = it.detail;
        items.push_back(row);
    }
    out["assumptions"] = items;
    out["c"] = r.c;
    out["overall"] = r.overall;
    return out;
}

[[nodiscard]] inline ordered_json convergence_to_json(const mild::ConvergenceReport& r) {
    ordered_json out;
    out["converged"] = r.converged;
    out["iterations"] = r.iterations;
    out["tol"] = r.tol;
    out["diff_norms"] = r.diff_norms;
    out["ratios"] = r.ratios;
    return out;
}

[[nodiscard]] inline ordered_json residual_to_json(const mild::ResidualReport& r) {
    ordered_json out;
    out["max_weighted"] = r.max_weighted;
    ordered_json segs = ordered_json::array();
    for (const auto& s : r.segments) {
        ordered_json row;
        row["j"] = s.j;
        row["max_weighted"] = s.max_weighted;
        row["evaluated"] = s.evaluated;
        row["excluded"] = s.excluded;
        segs.push_back(row);
    }
    out["segments"] = segs;
    return out;
}

/// Trajectory rows: segment_index, segment_kind, t, then either the spectral
/// coefficients or point values on a uniform grid over [0, pi].
inline void write_trajectory_csv(std::ostream& os, const mild::Trajectory& traj,
                                 int physical_grid = 0) {
    char buf[32];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    os << "segment_index,segment_kind,t";
    if (physical_grid > 0) {
        for (int i = 0; i < physical_grid; ++i) os << ",v" << (i + 1);
    } else {
        std::size_t n = traj.segments.front().z.front().modes();
        for (std::size_t k = 0; k < n; ++k) os << ",c" << (k + 1);
    }
    os << "\n";
    for (std::size_t s = 0; s < traj.segments.size(); ++s) {
        const auto& seg = traj.segments[s];
        const char* kind = seg.kind == mild::Trajectory::Kind::Solve ? "solve" : "impulse";
        for (std::size_t i = 0; i < seg.nodes.size(); ++i) {
            os << s << ',' << kind << ',' << fmt(seg.nodes[i]);
            if (physical_grid > 0) {
                for (int p = 0; p < physical_grid; ++p) {
                    double v = M_PI * (p + 1) / (physical_grid + 1);
                    os << ',' << fmt(seg.z[i].at(v));
                }
            } else {
                for (double c : seg.z[i].c) os << ',' << fmt(c);
            }
            os << "\n";
        }
    }
}

} // namespace fracevol::cli
