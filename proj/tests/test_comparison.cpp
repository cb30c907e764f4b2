#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace ridgepath;
using support::rel;

namespace {

Vector descending(Vector s) {
    std::sort(s.data(), s.data() + s.size(), std::greater<>());
    return s;
}

Vector poly_spectrum(Index p, double alpha) {
    Vector s(p);
    for (Index i = 0; i < p; ++i) s(i) = std::pow(static_cast<double>(i + 1), -alpha);
    return s;
}

// r unit spikes over a bulk at r/(p - r)
Vector spiked_spectrum(Index p, Index r) {
    Vector s = Vector::Constant(p, static_cast<double>(r) / static_cast<double>(p - r));
    s.head(r).setOnes();
    return s;
}

double max_over_t_grid(const Vector& s, double lambda, int points) {
    const double lo = 0.5 / (s(0) + lambda);
    const double hi = 0.5 / (s(s.size() - 1) + lambda) * 1.01;
    double best = 0.0;
    for (double t : log_grid(lo, hi, points)) best = std::max(best, c_constant(s, lambda, t).C);
    return best;
}

PenalisedSpectrum instance(std::uint64_t seed, double lambda, double sigma2, Index n = 40, Index p = 15) {
    Vector scales(p);
    for (Index j = 0; j < p; ++j) scales(j) = std::pow(1.0 + j, -0.5);
    auto inst = support::make_instance(n, p, sigma2, seed, scales);
    return decompose(inst.data, lambda, inst.truth);
}

} // namespace

TEST(CConstant, HandEvaluatedExample) {
    const Vector s = (Vector(3) << 4.0, 2.0, 1.0).finished();
    const CConstant c = c_constant(s, 0.0, 0.2);
    EXPECT_EQ(c.i_t, 2);
    EXPECT_NEAR(c.C, 12.0 / 13.0, 1e-15);
}

TEST(CConstant, ZeroBranchForLargeTimes) {
    const Vector s = (Vector(3) << 4.0, 2.0, 1.0).finished();
    const CConstant c = c_constant(s, 0.5, 0.5 / 1.5);
    EXPECT_EQ(c.i_t, 0);
    EXPECT_EQ(c.C, 0.0);
}

TEST(CConstant, RejectsTimesBelowAdmissibleRange) {
    const Vector s = (Vector(3) << 4.0, 2.0, 1.0).finished();
    EXPECT_THROW(c_constant(s, 0.0, 0.1), InputError);
    EXPECT_THROW(c_constant(Vector::Zero(3), 0.0, 1.0), InputError);
}

TEST(CConstant, PenaltyNeverIncreasesConstant) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 100; ++draw) {
        const Index p = 2 + static_cast<Index>(u(rng) * 40);
        Vector s(p);
        for (Index i = 0; i < p; ++i) s(i) = std::exp(6.0 * u(rng) - 3.0);
        if (draw % 4 == 0) s(p - 1) = 0.0;
        s = descending(s);
        const double lambda = std::exp(4.0 * u(rng) - 3.0);
        const double lo = 0.5 / s(0);
        const double hi = s(p - 1) > 0.0 ? 1.0 / s(p - 1) : 10.0 / s(p - 2);
        const double t = lo * std::pow(hi / lo, u(rng));
        EXPECT_LE(c_constant(s, lambda, t).C, c_constant(s, 0.0, t).C * (1 + 1e-12)) << "draw " << draw;
    }
}

TEST(CBar, SingleEigenvalueIsZero) {
    EXPECT_EQ(c_bar(Vector::Constant(1, 2.0), 0.0), 0.0);
    EXPECT_EQ(c_bar(Vector::Constant(5, 2.0), 0.3), 0.0);
}

TEST(CBar, PolynomialDecayBound) {
    const Vector s = poly_spectrum(200, 2.0);
    EXPECT_LE(c_bar(s, 0.0), 3.0);
}

TEST(CBar, IndexMaximumEqualsTimeGridSupremum) {
    for (double lambda : {0.0, 0.01}) {
        const Vector s = poly_spectrum(200, 2.0);
        EXPECT_NEAR(c_bar(s, lambda), max_over_t_grid(s, lambda, 100000), 1e-12);
    }
    const Vector s = spiked_spectrum(100, 20);
    EXPECT_NEAR(c_bar(s, 1.0), max_over_t_grid(s, 1.0, 100000), 1e-12);
}

TEST(CBar, SpikedModelBoundedUnderUnitPenalty) {
    for (Index p : {100, 500, 2000}) EXPECT_LE(c_bar(spiked_spectrum(p, 20), 1.0), 10.0) << "p = " << p;
}

TEST(CBar, SpikedModelGrowsWithoutPenalty) {
    // exact value (p - r)/(2r) at the spike edge
    for (Index p : {100, 500, 2000})
        EXPECT_NEAR(c_bar(spiked_spectrum(p, 20), 0.0), (p - 20) / 40.0, 1e-9 * p) << "p = " << p;
}

TEST(MainBound, AnalyticModeHoldsOnTimeGrid) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto spec = instance(10 + seed, 0.2, 2.0);
        const auto trace = cg_solve(spec);
        for (const TargetSpec& target : {TargetSpec{TargetBetaLambda{}}, TargetSpec{TargetBeta0{}},
                                         TargetSpec{TargetBetaLambdaPrime{0.1}}}) {
            for (double t : log_grid(0.5 / spec.norm(), 100.0 / spec.norm(), 64)) {
                const auto rec = check_main_bound(spec, trace, target, t, RiskMode::Analytic);
                EXPECT_TRUE(rec.satisfied) << target_name(target) << " t = " << t;
                EXPECT_LE(rec.lhs, rec.rhs * (1 + 1e-9));
                EXPECT_GE(rec.tau_mean, 0.0);
            }
        }
    }
}

TEST(MainBound, NoiselessCaseIsPureApproximation) {
    const auto spec = instance(20, 0.2, 0.0);
    const auto trace = cg_solve(spec);
    for (double t : log_grid(0.5 / spec.norm(), 100.0 / spec.norm(), 32)) {
        const auto rec = check_main_bound(spec, trace, TargetBetaLambda{}, t, RiskMode::Analytic);
        const Vector R = residual_filter(spec, GradientFlow{t});
        EXPECT_LT(rel(rec.lhs, 4.0 * approximation_error(spec, R, spec.beta_lambda())), 1e-14);
        EXPECT_TRUE(rec.satisfied);
    }
}

TEST(MainBound, TerminalStochasticPartIsFullTrace) {
    const auto spec = instance(21, 0.2, 1.3);
    double mu_min = spec.norm();
    for (Index i = 0; i < spec.p(); ++i) mu_min = std::min(mu_min, spec.mu(i));
    const double t = 1.0 / mu_min;
    const Vector R = residual_filter(spec, GradientFlow{t});
    const double stochastic = cg_risk_bound(spec, TargetBetaLambda{}, t) -
                              4.0 * approximation_error(spec, R, spec.beta_lambda());
    EXPECT_LT(rel(stochastic, 4.0 * stochastic_risk(spec, Vector::Zero(spec.p()))), 1e-12);

    // large t sends τ_t to the stopping index, where CG is ridge
    const auto trace = cg_solve(spec);
    const auto rec = check_main_bound(spec, trace, TargetBetaLambda{}, 1e8, RiskMode::MonteCarlo);
    EXPECT_DOUBLE_EQ(rec.tau_mean, static_cast<double>(trace.stop_index));
    EXPECT_LT(rel(rec.lhs, loss_in(spec, ridge(spec, spec.lambda()), TargetBetaLambda{})), 1e-9);
}

TEST(MainBound, MonteCarloModeSharesDesign) {
    auto inst = support::make_instance(40, 15, 2.0, 22);
    const auto base = decompose(inst.data, 0.2, inst.truth);
    std::mt19937_64 rng(22);
    const Vector signal = inst.data.X * base.truth().beta0;
    std::vector<PenalisedSpectrum> reps;
    std::vector<CGTrace> traces;
    for (int r = 0; r < 50; ++r) {
        reps.push_back(base.with_response(signal + support::gaussian_vector(40, rng, std::sqrt(2.0)), base.truth()));
        traces.push_back(cg_solve(reps.back()));
    }
    for (double t : log_grid(0.5 / base.norm(), 50.0 / base.norm(), 16)) {
        const auto rec = check_main_bound(reps, traces, TargetBeta0{}, t, RiskMode::MonteCarlo);
        EXPECT_TRUE(rec.satisfied) << "t = " << t;
        EXPECT_GT(rec.lhs_se, 0.0);
    }
}

TEST(MainBound, RejectsInadmissibleTime) {
    const auto spec = instance(23, 0.2, 1.0);
    const auto trace = cg_solve(spec);
    EXPECT_THROW(check_main_bound(spec, trace, TargetBeta0{}, 0.1 / spec.norm(), RiskMode::Analytic), InputError);
}

TEST(Oracle, ConstantsDominateFactors) {
    EXPECT_LE(gf_comparison_factor(), kOracleGfConstant);
    EXPECT_LE(kOracleGfConstant * kGfRidgeFactor * kGfRidgeFactor, kOracleRrConstant);
    const double x = 0.37;
    // (1 - e^{-x}) / (1 - 1/(1 + x)) at the maximiser stays below the factor
    EXPECT_LE((1 - std::exp(-x)) / (1 - 1 / (1 + x)), kGfRidgeFactor);
}

TEST(Oracle, BoundsHoldAndRestrictionOnlyRaisesMinimum) {
    auto inst = support::make_instance(40, 15, 2.0, 30);
    const auto base = decompose(inst.data, 0.2, inst.truth);
    std::mt19937_64 rng(30);
    const Vector signal = inst.data.X * base.truth().beta0;
    std::vector<PenalisedSpectrum> reps{base};
    std::vector<CGTrace> traces{cg_solve(base)};
    for (int r = 1; r < 20; ++r) {
        reps.push_back(base.with_response(signal + support::gaussian_vector(40, rng, std::sqrt(2.0)), base.truth()));
        traces.push_back(cg_solve(reps.back()));
    }
    for (const TargetSpec& target : {TargetSpec{TargetBeta0{}}, TargetSpec{TargetBetaLambda{}},
                                     TargetSpec{TargetBetaLambdaPrime{0.1}}}) {
        const auto o = oracle_comparison(reps, traces, target);
        EXPECT_TRUE(o.gf_bound_holds);
        EXPECT_TRUE(o.rr_bound_holds);
        EXPECT_GE(o.gf_oracle, o.gf_oracle_unrestricted);
        EXPECT_DOUBLE_EQ(o.gf_factor, 25.9 * (1 + o.c_bar));
        EXPECT_DOUBLE_EQ(o.rr_factor, 43.7 * (1 + o.c_bar));
        EXPECT_GE(o.rr_oracle_lambda, base.lambda());
        EXPECT_LE(o.rr_oracle_lambda, base.lambda() + 2.0 * base.norm());
    }
    EXPECT_THROW(oracle_comparison(reps, traces, TargetBetaLambdaPrime{1.0}), InputError);
}

TEST(Monotonicity, ZeroSignalIsInfeasible) {
    auto inst = support::make_instance(20, 10, 1.0, 40);
    inst.truth.beta0.setZero();
    const auto cert = monotonicity_certificate(decompose(inst.data, 1.0, inst.truth));
    EXPECT_FALSE(cert.feasible);
    EXPECT_FALSE(cert.holds_at_lambda);
}

TEST(Monotonicity, NoiselessQualifiesEverywhere) {
    const auto cert = monotonicity_certificate(instance(41, 0.0, 0.0));
    EXPECT_TRUE(cert.feasible);
    EXPECT_EQ(cert.lambda_min, 0.0);
    EXPECT_TRUE(cert.holds_at_lambda);
}

TEST(Monotonicity, QualifyingPenaltyGivesMonotoneFlow) {
    const auto base = instance(42, 0.0, 4.0, 20, 10);
    const auto cert = monotonicity_certificate(base);
    ASSERT_TRUE(cert.feasible);
    ASSERT_GT(cert.lambda_min, 0.0);
    EXPECT_FALSE(cert.holds_at_lambda);
    const auto spec = base.at_lambda(cert.lambda_min);
    EXPECT_TRUE(monotonicity_certificate(spec).holds_at_lambda);
    double mu_min = spec.norm();
    for (Index i = 0; i < spec.p(); ++i) mu_min = std::min(mu_min, spec.mu(i));
    EXPECT_TRUE(check_gf_monotone(spec, 50.0 / mu_min, 200, 1e-10).empty());
}

TEST(Monotonicity, UnpenalisedNoisyPathHasInteriorMinimum) {
    const auto spec = instance(43, 0.0, 20.0, 20, 10);
    EXPECT_FALSE(monotonicity_certificate(spec).holds_at_lambda);
    std::vector<double> risk;
    for (double t : log_grid(1e-3 / spec.norm(), 1e4 / spec.norm(), 200))
        risk.push_back(risk_linear(spec, GradientFlow{t}, TargetBeta0{}));
    const auto lowest = std::min_element(risk.begin(), risk.end());
    EXPECT_LT(*lowest, risk.front());
    EXPECT_LT(*lowest, risk.back());
    EXPECT_FALSE(check_gf_monotone(spec, 1e4 / spec.norm(), 200, 1e-10).empty());
}

TEST(OutOfSample, EmpiricalCovarianceHasNoGap) {
    auto inst = support::make_instance(30, 8, 1.0, 50);
    inst.truth.Sigma = inst.data.X.transpose() * inst.data.X / 30.0;
    const auto spec = decompose(inst.data, 0.3, inst.truth);
    std::mt19937_64 rng(50);
    const auto o = out_of_sample_gap(spec, support::gaussian_vector(8, rng), TargetBeta0{});
    EXPECT_LE(o.op_gap, 1e-12);
    EXPECT_LT(rel(o.loss_out, o.loss_in), 1e-12);
    EXPECT_TRUE(o.gap_ok);
}

TEST(OutOfSample, TargetEstimateHasZeroLosses) {
    const auto spec = instance(51, 0.3, 1.0);
    const auto o = out_of_sample_gap(spec, spec.beta0(), TargetBeta0{});
    EXPECT_EQ(o.loss_in, 0.0);
    EXPECT_EQ(o.loss_out, 0.0);
    EXPECT_TRUE(o.gap_ok);
}

TEST(OutOfSample, DeterministicGapBoundOnRandomInstances) {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 100; ++draw) {
        const Index n = 5 + static_cast<Index>(u(rng) * 40), p = 2 + static_cast<Index>(u(rng) * 30);
        const double lambda = 0.01 + u(rng);
        auto inst = support::make_instance(n, p, 1.0, 1000 + draw);
        const Matrix A = support::gaussian_matrix(p, p, rng);
        inst.truth.Sigma = A * A.transpose() / static_cast<double>(p);
        const auto spec = decompose(inst.data, lambda, inst.truth);
        const Vector b = support::gaussian_vector(p, rng);
        const auto o = out_of_sample_gap(spec, b, TargetBetaLambda{});
        EXPECT_TRUE(o.gap_ok) << "draw " << draw;

        const Matrix& S = *inst.truth.Sigma;
        const Matrix Sl = S + lambda * Matrix::Identity(p, p);
        const double N = Sl.ldlt().solve(S).trace();
        EXPECT_LT(rel(o.N_lambda, N), 1e-9);
        const double norm = Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().maxCoeff();
        EXPECT_LE(o.N_lambda, p / (1.0 + lambda / norm) * (1 + 1e-12));
    }
}

TEST(OutOfSample, RequiresPositiveDefinitePopulationCovariance) {
    auto inst = support::make_instance(10, 4, 1.0, 53);
    inst.truth.Sigma.reset();
    EXPECT_THROW(out_of_sample_gap(decompose(inst.data, 0.1, inst.truth), Vector::Zero(4), TargetBeta0{}),
                 InputError);
    inst.truth.Sigma = Matrix::Zero(4, 4);
    EXPECT_THROW(out_of_sample_gap(decompose(inst.data, 0.0, inst.truth), Vector::Zero(4), TargetBeta0{}),
                 InputError);
}
