#ifndef RIDGEPATH_RISK_ANALYSIS_HPP
#define RIDGEPATH_RISK_ANALYSIS_HPP

#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "ridgepath/core_spectral.hpp"
#include "ridgepath/error.hpp"
#include "ridgepath/estimators.hpp"

namespace ridgepath {

struct TargetBeta0 {};
struct TargetBetaLambda {};
/// β_{λ'} = Σ̂_{λ'}^{-1} Σ̂ β₀ with λ' in [0, λ].
struct TargetBetaLambdaPrime {
    double lambda_prime;
};

using TargetSpec = std::variant<TargetBeta0, TargetBetaLambda, TargetBetaLambdaPrime>;

inline std::string target_name(const TargetSpec& target) {
    if (std::holds_alternative<TargetBeta0>(target)) return "beta0";
    if (std::holds_alternative<TargetBetaLambda>(target)) return "beta_lambda";
    return "beta_lambda_prime(" + std::to_string(std::get<TargetBetaLambdaPrime>(target).lambda_prime) + ")";
}

/// Eigen-coordinates of the target vector γ.
inline Vector resolve_target(const PenalisedSpectrum& spec, const TargetSpec& target) {
    if (std::holds_alternative<TargetBeta0>(target)) return spec.beta0();
    if (std::holds_alternative<TargetBetaLambda>(target)) return spec.beta_lambda();
    const double lp = std::get<TargetBetaLambdaPrime>(target).lambda_prime;
    detail::require(lp >= 0.0 && lp <= spec.lambda(),
                    "target penalty " + std::to_string(lp) + " outside [0, lambda]");
    const Vector& b0 = spec.beta0();
    Vector gamma(spec.p());
    for (Index i = 0; i < spec.p(); ++i) {
        const double s = spec.s()(i);
        gamma(i) = s > 0.0 ? s / (s + lp) * b0(i) : 0.0;
    }
    return gamma;
}

/// Additive error terms; total = A + S - 2C.
struct ErrorBreakdown {
    double A = 0.0;
    double S = 0.0;
    double C = 0.0;
    double total = 0.0;
    /// Ā and S̄ of the explicit CG bounds, when computed.
    std::optional<double> A_bar;
    std::optional<double> S_bar;
    /// Upper bound on A from the truncated square-root filter (CG only).
    std::optional<double> A_upper;

    double identity_gap() const { return total - (A + S - 2.0 * C); }
};

/// ‖Σ̂_λ^{1/2}(β̂ - γ)‖².
inline double loss_in(const PenalisedSpectrum& spec, const Vector& beta_hat, const Vector& gamma) {
    detail::require(beta_hat.size() == spec.p() && gamma.size() == spec.p(),
                    "coordinate vectors must have length p");
    return (spec.mu().array() * (beta_hat - gamma).array().square()).sum();
}

inline double loss_in(const PenalisedSpectrum& spec, const Vector& beta_hat,
                      const TargetSpec& target) {
    return loss_in(spec, beta_hat, resolve_target(spec, target));
}

/// Standard decomposition for the estimator of filter values R (which may be
/// data-dependent; the identity is algebraic).
inline ErrorBreakdown decompose_filter(const PenalisedSpectrum& spec, const Vector& R,
                                       const Vector& gamma) {
    const Vector& b = spec.beta_lambda();
    const Vector& e = spec.eps_lambda();
    ErrorBreakdown out;
    for (Index i = 0; i < spec.p(); ++i) {
        const double root = std::sqrt(std::max(spec.mu(i), 0.0));
        const double bias = root * (R(i) * b(i) + gamma(i) - b(i));
        const double noise = (1.0 - R(i)) * e(i);
        out.A += bias * bias;
        out.S += noise * noise;
        out.C += bias * noise;
    }
    out.total = loss_in(spec, estimator_from_filter(spec, R), gamma);
    return out;
}

inline ErrorBreakdown decompose_linear(const PenalisedSpectrum& spec, const FilterSpec& filter,
                                       const TargetSpec& target) {
    if (std::holds_alternative<ConjugateGradient>(filter))
        throw InputError("decompose_linear takes RR, GF or GD filters; use decompose_cg for CG");
    return decompose_filter(spec, residual_filter(spec, filter), resolve_target(spec, target));
}

/// A_{λ,γ}(R).
inline double approximation_error(const PenalisedSpectrum& spec, const Vector& R,
                                  const Vector& gamma) {
    const Vector& b = spec.beta_lambda();
    double A = 0.0;
    for (Index i = 0; i < spec.p(); ++i) {
        const double r = R(i) * b(i) + gamma(i) - b(i);
        A += std::max(spec.mu(i), 0.0) * r * r;
    }
    return A;
}

/// (σ²/n) tr((I - R)² Σ̂_λ^{-1} Σ̂).
inline double stochastic_risk(const PenalisedSpectrum& spec, const Vector& R) {
    double tr = 0.0;
    for (Index i = 0; i < spec.p(); ++i) {
        const double s = spec.s()(i);
        if (s > 0.0) tr += (1.0 - R(i)) * (1.0 - R(i)) * s / spec.mu(i);
    }
    return spec.sigma2() / static_cast<double>(spec.n()) * tr;
}

inline double risk_from_filter(const PenalisedSpectrum& spec, const Vector& R,
                               const Vector& gamma) {
    return approximation_error(spec, R, gamma) + stochastic_risk(spec, R);
}

/// Conditional risk E[loss | X] of a deterministic filter estimator.
inline double risk_linear(const PenalisedSpectrum& spec, const FilterSpec& filter,
                          const TargetSpec& target) {
    if (std::holds_alternative<ConjugateGradient>(filter))
        throw InputError("the CG filter is data-dependent and has no closed-form risk");
    return risk_from_filter(spec, residual_filter(spec, filter), resolve_target(spec, target));
}

/// CG decomposition with truncated filters R_{t,<}, R_{t,>} for γ = β_λ.
/// total is the loss of the interpolated iterate from the trace.
inline ErrorBreakdown decompose_cg(const PenalisedSpectrum& spec, const CGTrace& trace, double t) {
    const ResidualPolynomial R = residual_polynomial(trace, t);
    const Vector Rv = cg_filter_values(spec, trace, t);
    const Vector& b = spec.beta_lambda();
    const Vector& e = spec.eps_lambda();
    const Vector& y = spec.y_lambda();

    double A_lower = 0.0; // ‖Σ̂_λ^{1/2} R_<^{1/2} β_λ‖²
    double full = 0.0;    // ‖R_t y_λ‖²
    double trunc = 0.0;   // ‖R_<^{1/2} y_λ‖²
    ErrorBreakdown out;
    for (Index i = 0; i < spec.p(); ++i) {
        const double x = spec.mu(i);
        const double r = Rv(i);
        // ties at x_{1,t} go to the lower branch; R vanishes there anyway
        const bool below = x <= R.x1_t;
        const double r_lo = below ? r : 0.0;
        const double r_hi = below ? 0.0 : r;
        A_lower += std::max(x, 0.0) * r_lo * b(i) * b(i);
        full += r * r * y(i) * y(i);
        trunc += r_lo * y(i) * y(i);
        out.S += (1.0 - r_lo) * e(i) * e(i);
        out.C += r_hi * y(i) * e(i);
    }
    out.A = A_lower + full - trunc;
    out.A_upper = A_lower;
    out.total = loss_in(spec, cg_interpolated(trace, t), b);
    return out;
}

/// Explicit CG loss bound at time t.
struct CGBound {
    double A_bar = 0.0;
    double S_bar = 0.0;
    double bound_total = 0.0;
    /// ⟨Σ̂_λ exp(-ρ_t Σ̂_λ/2) β_λ, γ - β_λ⟩
    double condition = 0.0;
    double rho_t = 0.0;
};

inline double gamma_condition(const PenalisedSpectrum& spec, double rho, const Vector& gamma) {
    const Vector& b = spec.beta_lambda();
    double c = 0.0;
    for (Index i = 0; i < spec.p(); ++i)
        c += spec.mu(i) * std::exp(-0.5 * rho * spec.mu(i)) * b(i) * (gamma(i) - b(i));
    return c;
}

/// 2Ā_t + 2S̄_t for γ = β_λ; 4Ā + 4S̄_t for any other γ satisfying the sign
/// condition (which always holds for β_{λ'}, λ' <= λ).
inline CGBound cg_bound(const PenalisedSpectrum& spec, const CGTrace& trace, double t,
                        const TargetSpec& target) {
    const ResidualPolynomial R = residual_polynomial(trace, t);
    const Vector gamma = resolve_target(spec, target);
    const Vector& b = spec.beta_lambda();
    const Vector& e = spec.eps_lambda();
    const double rho = R.rho_t;

    CGBound out;
    out.rho_t = rho;
    for (Index i = 0; i < spec.p(); ++i) {
        const double x = spec.mu(i);
        out.S_bar += std::min(rho * x, 1.0) * e(i) * e(i);
    }

    if (std::holds_alternative<TargetBetaLambda>(target)) {
        for (Index i = 0; i < spec.p(); ++i) {
            const double x = spec.mu(i);
            out.A_bar += x * std::exp(-rho * x) * b(i) * b(i);
        }
        out.bound_total = 2.0 * out.A_bar + 2.0 * out.S_bar;
        return out;
    }

    out.condition = gamma_condition(spec, rho, gamma);
    double nb = 0.0, ng = 0.0;
    for (Index i = 0; i < spec.p(); ++i) {
        nb += spec.mu(i) * b(i) * b(i);
        ng += spec.mu(i) * (gamma(i) - b(i)) * (gamma(i) - b(i));
    }
    const double slack = 1e-12 * std::sqrt(nb) * std::sqrt(ng);
    if (out.condition < -slack)
        throw ConditionViolated("target " + target_name(target) + " violates the sign condition at t = " +
                                std::to_string(t) + " (value " + std::to_string(out.condition) + ")");
    for (Index i = 0; i < spec.p(); ++i) {
        const double x = spec.mu(i);
        const double r = std::exp(-0.5 * rho * x) * b(i) + gamma(i) - b(i);
        out.A_bar += x * r * r;
    }
    out.bound_total = 4.0 * out.A_bar + 4.0 * out.S_bar;
    return out;
}

} // namespace ridgepath

#endif
