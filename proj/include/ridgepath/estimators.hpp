#ifndef RIDGEPATH_ESTIMATORS_HPP
#define RIDGEPATH_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ridgepath/core_spectral.hpp"
#include "ridgepath/error.hpp"

namespace ridgepath {

// Regularisation path parameters. Every estimator has the form
// Σ̂_λ^{-1/2}(I - R(Σ̂_λ)) y_λ for a residual filter R.

/// Ridge at penalty λ'. λ' = +inf is the zero estimator.
struct Ridge {
    double lambda_prime;
};
struct GradientFlow {
    double t;
};
struct GradientDescent {
    double eta;
    long k;
};
/// Interpolated conjugate gradients at t in [0, stop_index].
struct ConjugateGradient {
    double t;
};

using FilterSpec = std::variant<Ridge, GradientFlow, GradientDescent, ConjugateGradient>;

inline std::string filter_name(const FilterSpec& f) {
    struct {
        std::string operator()(const Ridge&) const { return "RR"; }
        std::string operator()(const GradientFlow&) const { return "GF"; }
        std::string operator()(const GradientDescent&) const { return "GD"; }
        std::string operator()(const ConjugateGradient&) const { return "CG"; }
    } v;
    return std::visit(v, f);
}

/// Values R(s_i + λ) of a deterministic (linear) residual filter. Coordinates
/// with s_i + λ = 0 get R = 1, i.e. the estimator vanishes there.
inline Vector residual_filter(const PenalisedSpectrum& spec, const FilterSpec& filter) {
    const double lambda = spec.lambda();
    Vector R(spec.p());
    for (Index i = 0; i < spec.p(); ++i) {
        const double x = spec.mu(i);
        if (x <= 0.0) {
            R(i) = 1.0;
            continue;
        }
        if (const auto* rr = std::get_if<Ridge>(&filter)) {
            const double shift = rr->lambda_prime - lambda;
            if (std::isinf(rr->lambda_prime))
                R(i) = 1.0;
            else
                R(i) = (shift + x) > 0.0 ? shift / (shift + x) : 1.0;
        } else if (const auto* gf = std::get_if<GradientFlow>(&filter)) {
            R(i) = std::exp(-gf->t * x);
        } else if (const auto* gd = std::get_if<GradientDescent>(&filter)) {
            R(i) = std::pow(1.0 - gd->eta * x, static_cast<double>(gd->k));
        } else {
            throw InputError("conjugate gradients have a data-dependent filter; "
                             "use the CG trace instead");
        }
    }
    return R;
}

/// Σ̂_λ^{-1/2}(I - R) y_λ from filter values at the eigenvalues.
inline Vector estimator_from_filter(const PenalisedSpectrum& spec, const Vector& R) {
    Vector beta(spec.p());
    for (Index i = 0; i < spec.p(); ++i)
        beta(i) = (1.0 - R(i)) * spec.y_lambda()(i) * detail::pinv_pow(spec.mu(i), -0.5);
    return beta;
}

/// Ridge estimator Σ̂_{λ'}^{-1} Xᵀy/n in eigen-coordinates.
inline Vector ridge(const PenalisedSpectrum& spec, double lambda_prime) {
    detail::require(lambda_prime >= 0.0, "ridge penalty must be non-negative");
    if (std::isinf(lambda_prime)) return Vector::Zero(spec.p());
    Vector beta(spec.p());
    for (Index i = 0; i < spec.p(); ++i) {
        const double d = spec.s()(i) + lambda_prime;
        beta(i) = (d > 0.0 && spec.s()(i) > 0.0) ? spec.xty()(i) / d : 0.0;
    }
    return beta;
}

/// 1/(2λ + ‖Σ̂‖).
inline double default_step(const PenalisedSpectrum& spec) {
    return 1.0 / (2.0 * spec.lambda() + spec.s_max());
}

struct GradientDescentPath {
    double eta = 0.0;
    std::vector<Vector> iterates;
    /// Set when eta >= 2/‖Σ̂_λ‖; iterates are still returned.
    bool divergent = false;
};

inline GradientDescentPath gradient_descent(const PenalisedSpectrum& spec, double eta, long K) {
    detail::require(eta > 0.0 && std::isfinite(eta), "step size must be positive");
    detail::require(K >= 0, "iteration count must be non-negative");
    GradientDescentPath path;
    path.eta = eta;
    path.divergent = eta >= 2.0 / spec.norm();

    Vector target(spec.p()); // Σ̂_λ^{1/2} y_λ
    for (Index i = 0; i < spec.p(); ++i)
        target(i) = std::sqrt(std::max(spec.mu(i), 0.0)) * spec.y_lambda()(i);
    const Vector mu = spec.mu();

    path.iterates.reserve(static_cast<std::size_t>(K) + 1);
    path.iterates.push_back(Vector::Zero(spec.p()));
    for (long k = 1; k <= K; ++k) {
        const Vector& prev = path.iterates.back();
        path.iterates.push_back(prev - eta * (mu.cwiseProduct(prev) - target));
    }
    return path;
}

inline Vector gradient_flow(const PenalisedSpectrum& spec, double t) {
    detail::require(t >= 0.0, "gradient flow time must be non-negative");
    return estimator_from_filter(spec, residual_filter(spec, GradientFlow{t}));
}

/// Lanczos matrix T_k associated with the first k CG steps.
struct LanczosTridiagonal {
    Vector diagonal;
    Vector off_diagonal;

    Matrix dense() const {
        const Index k = diagonal.size();
        Matrix T = Matrix::Zero(k, k);
        T.diagonal() = diagonal;
        if (k > 1) {
            T.diagonal(1) = off_diagonal;
            T.diagonal(-1) = off_diagonal;
        }
        return T;
    }
};

/// Record of a penalised CG run. Index k runs over 0..stop_index; step
/// scalars are stored with a[k-1] = a_k, b[k-1] = b_k.
struct CGTrace {
    std::vector<Vector> iterates; // eigen-coordinates of β̂_k
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> q_norm2; // ‖q_k‖², k = 0..stop_index
    std::vector<Vector> ritz;    // ascending zeros of R_k; ritz[0] is empty
    std::vector<double> rho;     // |R_k'(0)|, rho[0] = 0
    Index stop_index = 0;
    Index p_tilde = 0;

    LanczosTridiagonal tridiagonal(Index k) const {
        LanczosTridiagonal T;
        T.diagonal.resize(k);
        T.off_diagonal.resize(std::max<Index>(k - 1, 0));
        for (Index j = 1; j <= k; ++j) {
            double d = 1.0 / a[j - 1];
            if (j > 1) d += b[j - 2] / a[j - 2];
            T.diagonal(j - 1) = d;
            if (j < k) T.off_diagonal(j - 1) = std::sqrt(b[j - 1]) / a[j - 1];
        }
        return T;
    }

    /// Smallest zero of R_k; +inf for k = 0.
    double x1(Index k) const {
        return k == 0 ? std::numeric_limits<double>::infinity() : ritz[k](0);
    }
};

/// Penalised CG run on the normal equations Σ̂_λ β = Xᵀy/n, carried out with
/// matrix-vector products in the original coordinates. Stops once
/// ‖q_k‖ <= rel_tol ‖q_0‖ or after p_tilde steps. With `reorthogonalise`,
/// each new residual is projected off all earlier ones (twice), so the
/// computed iterates keep the exact-arithmetic residual polynomial.
inline CGTrace cg_solve(const PenalisedSpectrum& spec, double rel_tol = 1e-13,
                        bool reorthogonalise = true) {
    detail::require(rel_tol > 0.0, "CG tolerance must be positive");
    const Matrix& X = spec.data().X;
    const double n = static_cast<double>(spec.n());
    const double lambda = spec.lambda();

    CGTrace trace;
    trace.p_tilde = spec.p_tilde();

    Vector beta = Vector::Zero(spec.p());
    Vector q = X.transpose() * spec.data().y / n;
    Vector d = q;
    Vector e = X * d;
    double qq = q.squaredNorm();
    const double q0 = std::sqrt(qq);

    trace.iterates.push_back(Vector::Zero(spec.p()));
    trace.q_norm2.push_back(qq);
    trace.ritz.emplace_back();
    trace.rho.push_back(0.0);

    Eigen::SelfAdjointEigenSolver<Matrix> tridiag_solver;
    std::vector<Vector> directions; // normalised residuals q_0, q_1, ...
    if (reorthogonalise && q0 > 0.0) directions.push_back(q / q0);
    for (Index k = 1;; ++k) {
        if (std::sqrt(qq) <= rel_tol * q0 || k - 1 == trace.p_tilde) break;
        if (k > trace.p_tilde)
            throw NumericalError("CG exceeded the number of distinct eigenvalues");

        const double denom = e.squaredNorm() / n + lambda * d.squaredNorm();
        if (!(denom > 0.0))
            throw NumericalError("CG step denominator " + std::to_string(denom) +
                                 " is not positive at k = " + std::to_string(k));
        const double a = qq / denom;
        beta += a * d;
        q -= (a / n) * (X.transpose() * e) + lambda * a * d;
        if (reorthogonalise) {
            for (int pass = 0; pass < 2; ++pass)
                for (const Vector& u : directions) q -= u.dot(q) * u;
        }
        const double qq_next = q.squaredNorm();
        if (reorthogonalise && qq_next > 0.0) directions.push_back(q / std::sqrt(qq_next));
        const double b = qq_next / qq;
        d = q + b * d;
        e = X * d;
        qq = qq_next;

        trace.a.push_back(a);
        trace.b.push_back(b);
        trace.q_norm2.push_back(qq);
        trace.iterates.push_back(spec.to_eigen(beta));

        const LanczosTridiagonal T = trace.tridiagonal(k);
        if (k == 1) {
            trace.ritz.push_back(T.diagonal);
        } else {
            tridiag_solver.computeFromTridiagonal(T.diagonal, T.off_diagonal,
                                                  Eigen::EigenvaluesOnly);
            if (tridiag_solver.info() != Eigen::Success)
                throw NumericalError("Ritz value computation failed at k = " +
                                     std::to_string(k));
            trace.ritz.push_back(tridiag_solver.eigenvalues());
        }
        trace.rho.push_back(trace.ritz.back().cwiseInverse().sum());
        trace.stop_index = k;
    }
    return trace;
}

/// R_t = (1-α) R_k + α R_{k+1} for t = k + α, each factor in product form
/// over its Ritz values.
class ResidualPolynomial {
public:
    double t = 0.0;
    Index k = 0;
    double alpha = 0.0;
    double rho_t = 0.0;
    double x1_t = std::numeric_limits<double>::infinity();
    Vector lower_zeros; // zeros of R_k
    Vector upper_zeros; // zeros of R_{k+1}; empty when alpha = 0

    double operator()(double x) const {
        const double lo = product(lower_zeros, x);
        if (alpha == 0.0) return lo;
        return (1.0 - alpha) * lo + alpha * product(upper_zeros, x);
    }

    Index degree() const { return alpha == 0.0 ? k : k + 1; }

    static double product(const Vector& zeros, double x) {
        double r = 1.0;
        for (Index i = 0; i < zeros.size(); ++i) r *= 1.0 - x / zeros(i);
        return r;
    }
};

namespace detail {

inline void require_cg_time(const CGTrace& trace, double t) {
    require(std::isfinite(t) && t >= 0.0 && t <= static_cast<double>(trace.stop_index),
            "CG time " + std::to_string(t) + " outside [0, " +
                std::to_string(trace.stop_index) + "]");
}

inline std::pair<Index, double> split_time(double t) {
    const double fl = std::floor(t);
    return {static_cast<Index>(fl), t - fl};
}

} // namespace detail

inline ResidualPolynomial residual_polynomial(const CGTrace& trace, double t) {
    detail::require_cg_time(trace, t);
    ResidualPolynomial R;
    R.t = t;
    std::tie(R.k, R.alpha) = detail::split_time(t);
    R.lower_zeros = trace.ritz[R.k];
    if (R.alpha == 0.0) {
        R.rho_t = trace.rho[R.k];
        R.x1_t = trace.x1(R.k);
        return R;
    }
    R.upper_zeros = trace.ritz[R.k + 1];
    R.rho_t = (1.0 - R.alpha) * trace.rho[R.k] + R.alpha * trace.rho[R.k + 1];

    if (R.k == 0) {
        // 1 - α x / x_{1,1}
        R.x1_t = trace.x1(1) / R.alpha;
        return R;
    }
    // R_t > 0 at x_{1,k+1} and R_t <= 0 at x_{1,k} by interlacing.
    double lo = trace.x1(R.k + 1);
    double hi = trace.x1(R.k);
    if (R(hi) > 0.0) {
        R.x1_t = hi;
        return R;
    }
    while (hi - lo > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (R(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    R.x1_t = 0.5 * (lo + hi);
    return R;
}

/// (1-α) β̂_k + α β̂_{k+1} in eigen-coordinates.
inline Vector cg_interpolated(const CGTrace& trace, double t) {
    detail::require_cg_time(trace, t);
    const auto [k, alpha] = detail::split_time(t);
    if (alpha == 0.0) return trace.iterates[k];
    return (1.0 - alpha) * trace.iterates[k] + alpha * trace.iterates[k + 1];
}

/// Values R_t(s_i + λ) of the CG residual polynomial at the eigenvalues.
inline Vector cg_filter_values(const PenalisedSpectrum& spec, const ResidualPolynomial& R) {
    Vector out(spec.p());
    for (Index i = 0; i < spec.p(); ++i) out(i) = spec.mu(i) > 0.0 ? R(spec.mu(i)) : 1.0;
    return out;
}

/// Filter values realised by the interpolated iterate: R_i = 1 - √μ_i β̂_{t,i} / y_{λ,i}.
/// The product form is ill-conditioned at eigenvalues a Ritz value has
/// converged to; this reads the same values off the iterate. Coordinates with
/// negligible y_λ fall back to the product form (they carry no weight), and
/// null-space coordinates get 1.
inline Vector cg_filter_values(const PenalisedSpectrum& spec, const CGTrace& trace, double t) {
    const ResidualPolynomial R = residual_polynomial(trace, t);
    const Vector beta = cg_interpolated(trace, t);
    const Vector& y = spec.y_lambda();
    const double floor = 1e-14 * y.norm();
    Vector out(spec.p());
    for (Index i = 0; i < spec.p(); ++i) {
        if (spec.s()(i) <= 0.0 || spec.mu(i) <= 0.0)
            out(i) = 1.0;
        else if (std::abs(y(i)) > floor)
            out(i) = 1.0 - std::sqrt(spec.mu(i)) * beta(i) / y(i);
        else
            out(i) = R(spec.mu(i));
    }
    return out;
}

/// Inverse of t ↦ ρ_t / 2, capped at the stop index.
inline double tau(const CGTrace& trace, double t) {
    detail::require(t >= 0.0, "time must be non-negative");
    const double target = 2.0 * t;
    if (target >= trace.rho[trace.stop_index]) return static_cast<double>(trace.stop_index);
    // first knot with rho >= target
    const auto it = std::lower_bound(trace.rho.begin(), trace.rho.end(), target);
    const Index hi = it - trace.rho.begin();
    if (trace.rho[hi] == target) return static_cast<double>(hi);
    const Index lo = hi - 1;
    const double frac = (target - trace.rho[lo]) / (trace.rho[hi] - trace.rho[lo]);
    return static_cast<double>(lo) + frac;
}

} // namespace ridgepath

#endif
