#pragma once

// Catalogs of nonlinearities h(t,z) and impulse shape functions psi_j(t,z).
// Every entry carries its exact Lipschitz constant in the state norm; the
// contraction certificate is only as good as these constants, so arbitrary
// user expressions are not accepted.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracevol/resolvent.hpp"

namespace fracevol::mild {

using resolvent::SpectralState;

enum class NonlinKind { Zero, Linear, Sine, LinearTimeMod };

struct Nonlinearity {
    NonlinKind kind = NonlinKind::Zero;
    double gain = 0.0;
    double omega = 0.0;

    [[nodiscard]] static Nonlinearity zero() { return {}; }
    [[nodiscard]] static Nonlinearity linear(double gain) {
        return {NonlinKind::Linear, gain, 0.0};
    }
    [[nodiscard]] static Nonlinearity sine(double amp) {
        return {NonlinKind::Sine, amp, 0.0};
    }
    [[nodiscard]] static Nonlinearity linear_tmod(double gain, double omega) {
        return {NonlinKind::LinearTimeMod, gain, omega};
    }

    [[nodiscard]] double lipschitz() const {
        switch (kind) {
            case NonlinKind::Zero: return 0.0;
            default: return std::abs(gain);
        }
    }

    void apply(double t, const SpectralState& z, SpectralState& out) const {
        out.c.assign(z.c.size(), 0.0);
        switch (kind) {
            case NonlinKind::Zero:
                break;
            case NonlinKind::Linear:
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = gain * z.c[k];
                break;
            case NonlinKind::Sine:
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = gain * std::sin(z.c[k]);
                break;
            case NonlinKind::LinearTimeMod: {
                double a = gain * std::cos(omega * t);
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = a * z.c[k];
                break;
            }
        }
    }

    [[nodiscard]] const char* kind_name() const {
        switch (kind) {
            case NonlinKind::Zero: return "zero";
            case NonlinKind::Linear: return "linear";
            case NonlinKind::Sine: return "sine";
            case NonlinKind::LinearTimeMod: return "linear_tmod";
        }
        return "zero";
    }

    [[nodiscard]] static NonlinKind kind_from_name(const std::string& s) {
        if (s == "zero") return NonlinKind::Zero;
        if (s == "linear") return NonlinKind::Linear;
        if (s == "sine") return NonlinKind::Sine;
        if (s == "linear_tmod") return NonlinKind::LinearTimeMod;
        throw std::domain_error("unknown nonlinearity kind '" + s + "'");
    }
};

enum class ImpulseKind { Zero, Constant, Linear, Sine, LinearTimeMod };

/// psi_j of the factorization phi_j(t,z) = (u_j - t)^{1+beta} psi_j(t,z).
struct ImpulsePsi {
    ImpulseKind kind = ImpulseKind::Zero;
    double gain = 0.0;
    double omega = 0.0;
    std::vector<double> value;  // Constant kind

    [[nodiscard]] static ImpulsePsi zero() { return {}; }
    [[nodiscard]] static ImpulsePsi constant(std::vector<double> v) {
        ImpulsePsi p;
        p.kind = ImpulseKind::Constant;
        p.value = std::move(v);
        return p;
    }
    [[nodiscard]] static ImpulsePsi linear(double gain) {
        ImpulsePsi p;
        p.kind = ImpulseKind::Linear;
        p.gain = gain;
        return p;
    }
    [[nodiscard]] static ImpulsePsi sine(double amp) {
        ImpulsePsi p;
        p.kind = ImpulseKind::Sine;
        p.gain = amp;
        return p;
    }
    [[nodiscard]] static ImpulsePsi linear_tmod(double gain, double omega) {
        ImpulsePsi p;
        p.kind = ImpulseKind::LinearTimeMod;
        p.gain = gain;
        p.omega = omega;
        return p;
    }

    [[nodiscard]] double lipschitz() const {
        switch (kind) {
            case ImpulseKind::Zero:
            case ImpulseKind::Constant: return 0.0;
            default: return std::abs(gain);
        }
    }

    void apply(double t, const SpectralState& z, SpectralState& out) const {
        out.c.assign(z.c.size(), 0.0);
        switch (kind) {
            case ImpulseKind::Zero:
                break;
            case ImpulseKind::Constant:
                for (std::size_t k = 0; k < out.c.size() && k < value.size(); ++k)
                    out.c[k] = value[k];
                break;
            case ImpulseKind::Linear:
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = gain * z.c[k];
                break;
            case ImpulseKind::Sine:
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = gain * std::sin(z.c[k]);
                break;
            case ImpulseKind::LinearTimeMod: {
                double a = gain * std::cos(omega * t);
                for (std::size_t k = 0; k < z.c.size(); ++k) out.c[k] = a * z.c[k];
                break;
            }
        }
    }

    [[nodiscard]] const char* kind_name() const {
        switch (kind) {
            case ImpulseKind::Zero: return "zero";
            case ImpulseKind::Constant: return "constant";
            case ImpulseKind::Linear: return "linear";
            case ImpulseKind::Sine: return "sine";
            case ImpulseKind::LinearTimeMod: return "linear_tmod";
        }
        return "zero";
    }

    [[nodiscard]] static ImpulseKind kind_from_name(const std::string& s) {
        if (s == "zero") return ImpulseKind::Zero;
        if (s == "constant") return ImpulseKind::Constant;
        if (s == "linear") return ImpulseKind::Linear;
        if (s == "sine") return ImpulseKind::Sine;
        if (s == "linear_tmod") return ImpulseKind::LinearTimeMod;
        throw std::domain_error("unknown impulse kind '" + s + "'");
    }
};

} // namespace fracevol::mild
