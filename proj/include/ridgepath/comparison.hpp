#ifndef RIDGEPATH_COMPARISON_HPP
#define RIDGEPATH_COMPARISON_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ridgepath/core_spectral.hpp"
#include "ridgepath/error.hpp"
#include "ridgepath/estimators.hpp"
#include "ridgepath/risk_analysis.hpp"

namespace ridgepath {

/// 4 / (1 - e^{-1/2})².
inline double gf_comparison_factor() {
    const double c = 1.0 - std::exp(-0.5);
    return 4.0 / (c * c);
}

/// Upper bound on (1 - e^{-tx}) / (1 - (1 + tx)^{-1}).
inline constexpr double kGfRidgeFactor = 1.2985;
inline constexpr double kOracleGfConstant = 25.9;
inline constexpr double kOracleRrConstant = 43.7;

struct CConstant {
    /// 1-based index i_t, or 0 on the branch t >= (s_p + λ)^{-1}/2.
    Index i_t = 0;
    double C = 0.0;
};

/// C for a given 1-based split index i in {2..p}; s is descending.
inline double c_constant_at_index(const Vector& s, double lambda, Index i) {
    const Index p = s.size();
    detail::require(i >= 2 && i <= p, "split index outside {2..p}");
    const double si = s(i - 1) + lambda;
    const double sprev = s(i - 2) + lambda;
    double num = 0.0, head = 0.0, tail = 0.0;
    for (Index j = 1; j <= p; ++j) {
        const double sj = s(j - 1);
        if (j < i) {
            if (sj > 0.0) head += si * sj / (sj + lambda);
        } else {
            num += sj;
            tail += (sj + lambda) * sj / sprev;
        }
    }
    if (num <= 0.0) return 0.0;
    return num / (head + tail);
}

/// Comparison constant C_{t,λ} between CG at τ_t and gradient flow at t.
inline CConstant c_constant(const Vector& s, double lambda, double t) {
    const Index p = s.size();
    detail::require(p >= 1, "empty spectrum");
    detail::require(s(0) + lambda > 0.0, "s_1 + lambda must be positive");
    const double t_min = 0.5 / (s(0) + lambda);
    detail::require(t >= t_min * (1.0 - 1e-12),
                    "t = " + std::to_string(t) + " below admissible minimum " + std::to_string(t_min));
    const double sp = s(p - 1) + lambda;
    if (sp > 0.0 && t >= 0.5 / sp) return {};

    const double level = 0.5 / t - lambda;
    Index i_t = 0;
    for (Index j = 1; j <= p; ++j) {
        if (s(j - 1) < level) {
            i_t = j;
            break;
        }
    }
    if (i_t < 2) return {}; // only reachable through rounding at t_min
    return {i_t, c_constant_at_index(s, lambda, i_t)};
}

/// sup of C_{t,λ} over t >= (2‖Σ̂_λ‖)^{-1}. C depends on t only through i_t, and
/// i is attained as i_t exactly when s_i < s_{i-1}.
inline double c_bar(const Vector& s, double lambda) {
    detail::require(s.size() >= 1 && s(0) + lambda > 0.0, "s_1 + lambda must be positive");
    double best = 0.0;
    for (Index i = 2; i <= s.size(); ++i)
        if (s(i - 1) < s(i - 2)) best = std::max(best, c_constant_at_index(s, lambda, i));
    return best;
}

enum class RiskMode { Analytic, MonteCarlo };

struct ComparisonRecord {
    double t = 0.0;
    Index i_t = 0;
    double C_t_lambda = 0.0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double tau_mean = 0.0;
    RiskMode mode = RiskMode::Analytic;
    bool satisfied = false;
};

namespace detail {

inline void check_main_bound_time(const PenalisedSpectrum& spec, double t) {
    const double t_min = 0.5 / spec.norm();
    require(t >= t_min * (1.0 - 1e-12),
            "t = " + std::to_string(t) + " below admissible minimum " + std::to_string(t_min));
}

inline ComparisonRecord main_bound_rhs(const PenalisedSpectrum& spec, const TargetSpec& target,
                                       double t) {
    check_main_bound_time(spec, t);
    const Vector gamma = resolve_target(spec, target);
    if (!std::holds_alternative<TargetBetaLambda>(target)) {
        const double cond = gamma_condition(spec, 2.0 * t, gamma);
        const Vector& b = spec.beta_lambda();
        const double scale = std::sqrt(loss_in(spec, b, Vector::Zero(spec.p())) *
                                       loss_in(spec, gamma, b));
        if (cond < -1e-12 * scale)
            throw ConditionViolated("target " + target_name(target) +
                                    " violates the sign condition at t = " + std::to_string(t));
    }
    ComparisonRecord rec;
    rec.t = t;
    const CConstant c = c_constant(spec.s(), spec.lambda(), t);
    rec.i_t = c.i_t;
    rec.C_t_lambda = c.C;
    rec.rhs = (1.0 + c.C) * gf_comparison_factor() * risk_linear(spec, GradientFlow{t}, target);
    return rec;
}

} // namespace detail

/// Explicit bound 4A(GF_t) + (4σ²/n) tr((2t ∧ Σ̂_λ^{-1}) Σ̂) on the CG risk at τ_t.
inline double cg_risk_bound(const PenalisedSpectrum& spec, const TargetSpec& target, double t) {
    const Vector gamma = resolve_target(spec, target);
    const Vector R = residual_filter(spec, GradientFlow{t});
    double tr = 0.0;
    for (Index i = 0; i < spec.p(); ++i) {
        const double s = spec.s()(i);
        if (s > 0.0) tr += std::min(2.0 * t, 1.0 / spec.mu(i)) * s;
    }
    return 4.0 * approximation_error(spec, R, gamma) +
           4.0 * spec.sigma2() / static_cast<double>(spec.n()) * tr;
}

/// Main comparison at GF time t. Analytic mode uses the explicit bound on the
/// CG risk (pathwise in X); Monte Carlo mode averages CG losses at each
/// replicate's own τ_t, all replicates sharing the design.
inline ComparisonRecord check_main_bound(std::span<const PenalisedSpectrum> replicates,
                                         std::span<const CGTrace> traces,
                                         const TargetSpec& target, double t, RiskMode mode) {
    detail::require(!replicates.empty(), "at least one replicate is required");
    const PenalisedSpectrum& spec = replicates.front();
    ComparisonRecord rec = detail::main_bound_rhs(spec, target, t);
    rec.mode = mode;
    if (mode == RiskMode::Analytic) {
        rec.lhs = cg_risk_bound(spec, target, t);
        if (!traces.empty()) rec.tau_mean = tau(traces.front(), t);
        rec.satisfied = rec.lhs <= rec.rhs * (1.0 + 1e-9);
        return rec;
    }
    detail::require(traces.size() == replicates.size(), "one CG trace per replicate required");
    const auto m = static_cast<double>(replicates.size());
    double sum = 0.0, sum2 = 0.0, tau_sum = 0.0;
    for (std::size_t r = 0; r < replicates.size(); ++r) {
        const double tt = tau(traces[r], t);
        const double l = loss_in(replicates[r], cg_interpolated(traces[r], tt), target);
        sum += l;
        sum2 += l * l;
        tau_sum += tt;
    }
    rec.lhs = sum / m;
    rec.tau_mean = tau_sum / m;
    rec.lhs_se = m > 1.0 ? std::sqrt(std::max(sum2 - m * rec.lhs * rec.lhs, 0.0) / (m - 1.0) / m) : 0.0;
    rec.satisfied = rec.lhs - 3.0 * rec.lhs_se <= rec.rhs * (1.0 + 1e-9);
    return rec;
}

inline ComparisonRecord check_main_bound(const PenalisedSpectrum& spec, const CGTrace& trace,
                                         const TargetSpec& target, double t, RiskMode mode) {
    return check_main_bound(std::span<const PenalisedSpectrum>(&spec, 1),
                            std::span<const CGTrace>(&trace, 1), target, t, mode);
}

/// n log-spaced points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

/// CG grid: all knots plus `subdivisions` steps per unit.
inline std::vector<double> cg_grid(Index max_t, int subdivisions) {
    std::vector<double> g;
    for (Index k = 0; k < max_t; ++k)
        for (int j = 0; j < subdivisions; ++j)
            g.push_back(static_cast<double>(k) + static_cast<double>(j) / subdivisions);
    g.push_back(static_cast<double>(max_t));
    return g;
}

struct OracleComparison {
    double cg_oracle = 0.0;
    double cg_oracle_t = 0.0;
    double gf_oracle = 0.0; // over t >= (2‖Σ̂_λ‖)^{-1}
    double gf_oracle_t = 0.0;
    double gf_oracle_unrestricted = 0.0; // over t >= 0
    double rr_oracle = 0.0; // over λ~ in [λ, λ + 2‖Σ̂_λ‖]
    double rr_oracle_lambda = 0.0;
    double c_bar = 0.0;
    double gf_factor = 0.0; // 25.9 (1 + C̄_λ)
    double rr_factor = 0.0; // 43.7 (1 + C̄_λ)
    bool gf_bound_holds = false;
    bool rr_bound_holds = false;
};

/// Oracle risks along the three paths; CG risk is the Monte Carlo mean over
/// replicates sharing the design.
inline OracleComparison oracle_comparison(std::span<const PenalisedSpectrum> replicates,
                                          std::span<const CGTrace> traces,
                                          const TargetSpec& target, int grid_points = 512,
                                          int cg_subdivisions = 8) {
    detail::require(!replicates.empty() && traces.size() == replicates.size(),
                    "one CG trace per replicate required");
    if (const auto* lp = std::get_if<TargetBetaLambdaPrime>(&target))
        detail::require(lp->lambda_prime >= 0.0 && lp->lambda_prime <= replicates.front().lambda(),
                        "oracle comparison needs lambda' in [0, lambda]");
    const PenalisedSpectrum& spec = replicates.front();
    OracleComparison out;

    Index max_stop = 0;
    for (const auto& tr : traces) max_stop = std::max(max_stop, tr.stop_index);
    out.cg_oracle = std::numeric_limits<double>::infinity();
    for (double t : cg_grid(max_stop, cg_subdivisions)) {
        double sum = 0.0;
        for (std::size_t r = 0; r < replicates.size(); ++r) {
            const double tt = std::min(t, static_cast<double>(traces[r].stop_index));
            sum += loss_in(replicates[r], cg_interpolated(traces[r], tt), target);
        }
        const double mean = sum / static_cast<double>(replicates.size());
        if (mean < out.cg_oracle) {
            out.cg_oracle = mean;
            out.cg_oracle_t = t;
        }
    }

    double mu_min = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < spec.p(); ++i)
        if (spec.s()(i) > 0.0) mu_min = std::min(mu_min, spec.mu(i));
    const double t_lo = 0.5 / spec.norm();
    const double t_hi = std::max(50.0 / mu_min, 2.0 * t_lo);

    out.gf_oracle = std::numeric_limits<double>::infinity();
    for (double t : log_grid(t_lo, t_hi, grid_points)) {
        const double r = risk_linear(spec, GradientFlow{t}, target);
        if (r < out.gf_oracle) {
            out.gf_oracle = r;
            out.gf_oracle_t = t;
        }
    }
    out.gf_oracle_unrestricted = std::min(out.gf_oracle, risk_linear(spec, GradientFlow{0.0}, target));
    for (double t : log_grid(1e-6 * t_lo, t_lo, grid_points))
        out.gf_oracle_unrestricted = std::min(out.gf_oracle_unrestricted,
                                              risk_linear(spec, GradientFlow{t}, target));

    const double lambda = spec.lambda();
    out.rr_oracle = risk_linear(spec, Ridge{lambda}, target);
    out.rr_oracle_lambda = lambda;
    for (double d : log_grid(1e-8 * spec.norm(), 2.0 * spec.norm(), grid_points)) {
        const double r = risk_linear(spec, Ridge{lambda + d}, target);
        if (r < out.rr_oracle) {
            out.rr_oracle = r;
            out.rr_oracle_lambda = lambda + d;
        }
    }

    out.c_bar = c_bar(spec.s(), lambda);
    out.gf_factor = kOracleGfConstant * (1.0 + out.c_bar);
    out.rr_factor = kOracleRrConstant * (1.0 + out.c_bar);
    out.gf_bound_holds = out.cg_oracle <= out.gf_factor * out.gf_oracle;
    out.rr_bound_holds = out.cg_oracle <= out.rr_factor * out.rr_oracle;
    return out;
}

struct MonotonicityCertificate {
    bool feasible = false;
    /// Smallest λ for which all tail inequalities hold (0 when σ² = 0).
    double lambda_min = std::numeric_limits<double>::infinity();
    bool holds_at_lambda = false;
};

/// Penalty level above which the GF risk for γ = β₀ decreases along the path.
inline MonotonicityCertificate monotonicity_certificate(const PenalisedSpectrum& spec) {
    MonotonicityCertificate out;
    const double noise = spec.sigma2() / static_cast<double>(spec.n());
    const Vector& b0 = spec.beta0();
    const Vector& s = spec.s();
    if (noise == 0.0) {
        out.feasible = true;
        out.lambda_min = 0.0;
        out.holds_at_lambda = true;
        return out;
    }
    double tail_s = 0.0, tail_b = 0.0, need = 0.0;
    for (Index i = spec.p() - 1; i >= 0; --i) {
        tail_s += s(i);
        tail_b += s(i) * b0(i) * b0(i);
        if (tail_s <= 0.0) continue;
        if (tail_b <= 0.0) return out;
        need = std::max(need, noise * tail_s / tail_b);
    }
    out.feasible = true;
    out.lambda_min = need;
    out.holds_at_lambda = spec.lambda() >= need && spec.lambda() > 0.0;
    return out;
}

struct OutOfSampleRecord {
    double N_lambda = 0.0;
    double op_gap = 0.0;
    double loss_in = 0.0;
    double loss_out = 0.0;
    bool gap_ok = false;
};

/// Effective rank tr(Σ_λ^{-1}Σ).
inline double effective_rank(const Matrix& Sigma, double lambda) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Sigma, Eigen::EigenvaluesOnly);
    double N = 0.0;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double v = std::max(es.eigenvalues()(i), 0.0);
        if (v > 0.0) N += v / (v + lambda);
    }
    return N;
}

/// In-sample versus out-of-sample loss with the deterministic gap bound
/// |ℓ_out - ℓ_in| <= ‖Σ_λ^{-1/2}(Σ - Σ̂)Σ_λ^{-1/2}‖ ℓ_out.
inline OutOfSampleRecord out_of_sample_gap(const PenalisedSpectrum& spec, const Vector& beta_hat,
                                           const TargetSpec& target) {
    const auto& Sigma_opt = spec.truth().Sigma;
    if (!Sigma_opt) throw InputError("out-of-sample loss requires the population covariance");
    const Matrix& Sigma = *Sigma_opt;
    const double lambda = spec.lambda();

    Eigen::SelfAdjointEigenSolver<Matrix> es(Sigma);
    const Vector pop = es.eigenvalues().array() + lambda;
    detail::require(pop.minCoeff() > 0.0,
                    "population covariance plus lambda must be positive definite");
    const Matrix inv_root =
        es.eigenvectors() * pop.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

    const Matrix& X = spec.data().X;
    const Matrix emp = X.transpose() * X / static_cast<double>(spec.n());
    const Matrix M = inv_root * (Sigma - emp) * inv_root;
    Eigen::SelfAdjointEigenSolver<Matrix> gap(M, Eigen::EigenvaluesOnly);

    OutOfSampleRecord out;
    out.N_lambda = effective_rank(Sigma, lambda);
    out.op_gap = gap.eigenvalues().cwiseAbs().maxCoeff();
    const Vector gamma = resolve_target(spec, target);
    out.loss_in = loss_in(spec, beta_hat, gamma);
    const Vector diff = spec.to_original(beta_hat - gamma);
    out.loss_out = diff.dot(Sigma * diff) + lambda * diff.squaredNorm();
    out.gap_ok = std::abs(out.loss_out - out.loss_in) <=
                 out.op_gap * out.loss_out + 1e-9 * std::max(out.loss_out, out.loss_in);
    return out;
}

} // namespace ridgepath

#endif
