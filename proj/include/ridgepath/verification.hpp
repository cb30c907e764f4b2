#ifndef RIDGEPATH_VERIFICATION_HPP
#define RIDGEPATH_VERIFICATION_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ridgepath/comparison.hpp"
#include "ridgepath/core_spectral.hpp"
#include "ridgepath/estimators.hpp"
#include "ridgepath/experiments.hpp"
#include "ridgepath/risk_analysis.hpp"

namespace ridgepath {

/// Ritz interlacing x_{j,k+1} <= x_{j,k} <= x_{j+1,k+1}, up to `slack`.
inline std::vector<Violation> check_interlacing(const CGTrace& trace, double slack, int replicate = 0) {
    std::vector<Violation> out;
    for (Index k = 1; k < trace.stop_index; ++k) {
        const Vector& a = trace.ritz[k];
        const Vector& b = trace.ritz[k + 1];
        for (Index j = 0; j < k; ++j) {
            if (b(j) > a(j) + slack || a(j) > b(j + 1) + slack)
                out.push_back({"estimators", "cg_solve(interlacing)", replicate, static_cast<double>(k),
                               "x_{" + std::to_string(j + 1) + "," + std::to_string(k) + "} = " +
                                   detail::format_double(a(j)) + " not between " +
                                   detail::format_double(b(j)) + " and " + detail::format_double(b(j + 1))});
        }
    }
    return out;
}

/// (1 - ρ_t x)_+ <= R_t(x) <= exp(-ρ_t x) on `points` equispaced x in [0, x_{1,t}].
inline std::vector<Violation> check_residual_bounds(const CGTrace& trace, double t, int points,
                                                    double slack, int replicate = 0) {
    std::vector<Violation> out;
    const ResidualPolynomial R = residual_polynomial(trace, t);
    if (!std::isfinite(R.x1_t)) return out;
    for (int i = 0; i < points; ++i) {
        const double x = R.x1_t * static_cast<double>(i) / std::max(points - 1, 1);
        const double r = R(x);
        const double lo = std::max(1.0 - R.rho_t * x, 0.0);
        const double hi = std::exp(-R.rho_t * x);
        if (r < lo - slack || r > hi + slack)
            out.push_back({"estimators", "residual_polynomial(bounds)", replicate, t,
                           "R(" + detail::format_double(x) + ") = " + detail::format_double(r) +
                               " outside [" + detail::format_double(lo) + ", " +
                               detail::format_double(hi) + "]"});
    }
    return out;
}

/// GF risk for γ = β₀ sampled at `points` times on [0, t_max]; reports
/// increases beyond slack·max risk.
inline std::vector<Violation> check_gf_monotone(const PenalisedSpectrum& spec, double t_max, int points,
                                                double slack, int replicate = 0) {
    std::vector<Violation> out;
    std::vector<double> risk;
    for (int i = 0; i < points; ++i) {
        const double t = t_max * static_cast<double>(i) / std::max(points - 1, 1);
        risk.push_back(risk_linear(spec, GradientFlow{t}, TargetBeta0{}));
    }
    const double scale = *std::max_element(risk.begin(), risk.end());
    for (std::size_t i = 1; i < risk.size(); ++i)
        if (risk[i] > risk[i - 1] + slack * scale)
            out.push_back({"comparison", "monotonicity_certificate", replicate,
                           t_max * static_cast<double>(i) / std::max(points - 1, 1),
                           "GF risk rises from " + detail::format_double(risk[i - 1]) + " to " +
                               detail::format_double(risk[i])});
    return out;
}

struct VerifyReport {
    std::vector<Violation> violations;
    std::vector<std::string> summary;
    bool ok() const { return violations.empty(); }
};

/// Full identity and inequality suite on a simulation config.
inline VerifyReport verify_config(const SimConfig& cfg, unsigned workers = worker_count()) {
    VerifyReport rep;
    const PathRun run = run_paths(cfg, workers);
    rep.violations = run.violations;
    rep.summary.push_back("paths: " + std::to_string(run.records.size()) + " records, " +
                          std::to_string(cfg.replicates) + " replicates");
    rep.summary.push_back("max relative identity gap: " + detail::format_double(run.max_identity_gap));
    rep.summary.push_back("max terminal CG/ridge gap: " + detail::format_double(run.max_terminal_gap));
    if (run.max_terminal_gap > 1e-8)
        rep.violations.push_back({"estimators", "cg_solve(terminal)", 0, 0.0,
                                  "relative gap to ridge " + detail::format_double(run.max_terminal_gap)});

    for (int r = 0; r < cfg.replicates; ++r) {
        const Sample sample = generate(cfg, r);
        const PenalisedSpectrum spec = decompose(sample.data, cfg.lambda, sample.truth);
        const CGTrace trace = cg_solve(spec);
        auto add = [&](std::vector<Violation> v) {
            rep.violations.insert(rep.violations.end(), v.begin(), v.end());
        };
        add(check_interlacing(trace, 1e-10 * spec.norm(), r));
        for (double t : cg_grid(trace.stop_index, 4)) add(check_residual_bounds(trace, t, 100, 1e-10, r));
        if (r == 0) {
            const Vector rr = ridge(spec, cfg.lambda);
            for (const Vector* b : {&rr, &trace.iterates.back(), &trace.iterates[trace.stop_index / 2]}) {
                const OutOfSampleRecord o = out_of_sample_gap(spec, *b, TargetBeta0{});
                if (!o.gap_ok)
                    rep.violations.push_back({"comparison", "out_of_sample_gap", r, 0.0,
                                              "|out - in| = " + detail::format_double(std::abs(o.loss_out - o.loss_in)) +
                                                  " exceeds " + detail::format_double(o.op_gap * o.loss_out)});
            }
            const MonotonicityCertificate m = monotonicity_certificate(spec);
            rep.summary.push_back("monotonicity: lambda_min = " + detail::format_double(m.lambda_min) +
                                  (m.holds_at_lambda ? " (holds)" : " (not certified)"));
            if (m.holds_at_lambda) {
                double mu_min = spec.norm();
                for (Index i = 0; i < spec.p(); ++i)
                    if (spec.mu(i) > 0.0) mu_min = std::min(mu_min, spec.mu(i));
                add(check_gf_monotone(spec, 50.0 / mu_min, 200, 1e-10, r));
            }
        }
    }

    // oracle risks are conditional on one design
    SimConfig fixed = cfg;
    fixed.fixed_design = true;
    std::vector<PenalisedSpectrum> shared;
    std::vector<CGTrace> shared_traces;
    for (int r = 0; r < cfg.replicates; ++r) {
        Sample sample = generate(fixed, r);
        if (r == 0)
            shared.push_back(decompose(sample.data, cfg.lambda, sample.truth));
        else
            shared.push_back(shared.front().with_response(sample.data.y, sample.truth));
        shared_traces.push_back(cg_solve(shared.back()));
    }
    for (const auto& target : {TargetSpec{TargetBeta0{}}, TargetSpec{TargetBetaLambda{}}}) {
        const OracleComparison o = oracle_comparison(shared, shared_traces, target);
        rep.summary.push_back("oracle (" + target_name(target) + "): CG " + detail::format_double(o.cg_oracle) +
                              ", GF " + detail::format_double(o.gf_oracle) + ", RR " +
                              detail::format_double(o.rr_oracle) + ", C_bar " + detail::format_double(o.c_bar));
        if (!o.gf_bound_holds)
            rep.violations.push_back({"comparison", "oracle_comparison(GF)", 0, o.cg_oracle_t,
                                      "CG oracle " + detail::format_double(o.cg_oracle) + " > " +
                                          detail::format_double(o.gf_factor * o.gf_oracle)});
        if (!o.rr_bound_holds)
            rep.violations.push_back({"comparison", "oracle_comparison(RR)", 0, o.cg_oracle_t,
                                      "CG oracle " + detail::format_double(o.cg_oracle) + " > " +
                                          detail::format_double(o.rr_factor * o.rr_oracle)});
    }
    return rep;
}

} // namespace ridgepath

#endif
