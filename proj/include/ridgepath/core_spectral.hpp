#ifndef RIDGEPATH_CORE_SPECTRAL_HPP
#define RIDGEPATH_CORE_SPECTRAL_HPP

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ridgepath/error.hpp"

namespace ridgepath {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Linear model observations: rows of X are the feature vectors x_i.
struct Dataset {
    Matrix X;
    Vector y;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
};

inline void validate(const Dataset& data) {
    detail::require(data.n() > 0 && data.p() > 0, "dataset must have n > 0 and p > 0");
    detail::require(data.y.size() == data.n(),
                    "response length " + std::to_string(data.y.size()) +
                        " does not match n = " + std::to_string(data.n()));
    detail::require(data.X.allFinite(), "design matrix has non-finite entries");
    detail::require(data.y.allFinite(), "response has non-finite entries");
}

/// Ground truth attached to a dataset for risk computations.
struct ModelTruth {
    Vector beta0;
    double sigma2 = 0.0;
    std::optional<Matrix> Sigma;
};

/// Eigen-decomposition of XᵀX/n shared between spectra at different
/// penalties or responses.
struct SpectralBasis {
    Vector s;   // descending, zero-padded to length p
    Matrix V;   // p×p orthonormal, columns are eigenvectors
    Index rank = 0;
};

namespace detail {

/// Singular values below this fraction of the largest are treated as zero.
inline double rank_tolerance(Index n, Index p) {
    return static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon();
}

inline std::shared_ptr<const SpectralBasis> make_basis(const Matrix& X) {
    const Index n = X.rows();
    const Index p = X.cols();
    Eigen::BDCSVD<Matrix> svd(X / std::sqrt(static_cast<double>(n)),
                              Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success)
        throw NumericalError("singular value decomposition of the design failed");

    auto basis = std::make_shared<SpectralBasis>();
    basis->V = svd.matrixV();
    basis->s = Vector::Zero(p);
    const Vector& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? rank_tolerance(n, p) * sv(0) : 0.0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            basis->s(i) = sv(i) * sv(i);
            ++basis->rank;
        }
    }
    return basis;
}

/// x^a with the pseudo-inverse convention 0^a = 0 for a < 0.
inline double pinv_pow(double x, double a) {
    if (x <= 0.0) return a == 0.0 ? 1.0 : 0.0;
    return std::pow(x, a);
}

inline void validate_truth(const ModelTruth& truth, Index p) {
    require(truth.beta0.size() == p, "beta0 length " + std::to_string(truth.beta0.size()) +
                                         " does not match p = " + std::to_string(p));
    require(truth.beta0.allFinite(), "beta0 has non-finite entries");
    require(std::isfinite(truth.sigma2) && truth.sigma2 >= 0.0,
            "noise variance must be finite and non-negative");
    if (truth.Sigma) {
        const Matrix& S = *truth.Sigma;
        require(S.rows() == p && S.cols() == p, "population covariance must be p×p");
        require(S.allFinite(), "population covariance has non-finite entries");
        const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
        require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                "population covariance is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() >= -1e-10 * scale,
                "population covariance is not positive semi-definite");
    }
}

} // namespace detail

/// Eigenbasis representation of Σ̂_λ = XᵀX/n + λI together with the
/// transformed response y_λ and, when truth is attached, β_λ and ε_λ.
/// All coordinate vectors refer to the columns of V(). Immutable.
class PenalisedSpectrum {
public:
    double lambda() const { return lambda_; }
    Index n() const { return data_->n(); }
    Index p() const { return data_->p(); }
    Index rank() const { return basis_->rank; }
    Index p_tilde() const { return p_tilde_; }

    const Vector& s() const { return basis_->s; }
    const Matrix& V() const { return basis_->V; }
    double s_max() const { return basis_->s.size() ? basis_->s(0) : 0.0; }

    /// Eigenvalue s_i + λ of Σ̂_λ.
    double mu(Index i) const { return basis_->s(i) + lambda_; }
    Vector mu() const { return basis_->s.array() + lambda_; }
    /// Spectral norm ‖Σ̂_λ‖.
    double norm() const { return s_max() + lambda_; }

    const Vector& y_lambda() const { return y_lambda_; }
    /// Coordinates of Xᵀy/n.
    const Vector& xty() const { return xty_; }

    bool has_truth() const { return truth_ != nullptr; }
    const ModelTruth& truth() const {
        need_truth();
        return *truth_;
    }
    double sigma2() const { return truth().sigma2; }
    /// Coordinates of the minimum-norm β₀.
    const Vector& beta0() const {
        need_truth();
        return beta0_;
    }
    const Vector& beta_lambda() const {
        need_truth();
        return beta_lambda_;
    }
    const Vector& eps_lambda() const {
        need_truth();
        return eps_lambda_;
    }

    const Dataset& data() const { return *data_; }
    std::shared_ptr<const Dataset> data_ptr() const { return data_; }
    std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }

    Vector to_original(const Vector& coords) const { return V() * coords; }
    Vector to_eigen(const Vector& v) const { return V().transpose() * v; }

    /// Same design and response at a different penalty.
    PenalisedSpectrum at_lambda(double lambda) const {
        std::optional<ModelTruth> t;
        if (truth_) t = *truth_;
        return PenalisedSpectrum(data_, basis_, lambda, std::move(t));
    }

    /// Same design (and eigen-decomposition) with a new response.
    PenalisedSpectrum with_response(Vector y, std::optional<ModelTruth> truth = {}) const {
        auto data = std::make_shared<Dataset>(Dataset{data_->X, std::move(y)});
        validate(*data);
        return PenalisedSpectrum(std::move(data), basis_, lambda_, std::move(truth));
    }

    PenalisedSpectrum(std::shared_ptr<const Dataset> data,
                      std::shared_ptr<const SpectralBasis> basis, double lambda,
                      std::optional<ModelTruth> truth)
        : data_(std::move(data)), basis_(std::move(basis)), lambda_(lambda) {
        detail::require(std::isfinite(lambda) && lambda >= 0.0,
                        "penalty lambda must be finite and non-negative");
        const Index p = data_->p();
        const double n = static_cast<double>(data_->n());
        const Vector& s = basis_->s;

        p_tilde_ = count_distinct();

        xty_ = V().transpose() * (data_->X.transpose() * data_->y) / n;
        y_lambda_.resize(p);
        for (Index i = 0; i < p; ++i)
            y_lambda_(i) = s(i) > 0.0 ? xty_(i) * detail::pinv_pow(mu(i), -0.5) : 0.0;

        if (truth) {
            detail::validate_truth(*truth, p);
            // Representative β₀ = X⁺Xβ₀.
            beta0_ = V().transpose() * truth->beta0;
            for (Index i = basis_->rank; i < p; ++i) beta0_(i) = 0.0;
            truth->beta0 = V() * beta0_;
            truth_ = std::make_shared<const ModelTruth>(std::move(*truth));

            const Vector eps = data_->y - data_->X * truth_->beta0;
            const Vector xte = V().transpose() * (data_->X.transpose() * eps) / n;
            beta_lambda_.resize(p);
            eps_lambda_.resize(p);
            for (Index i = 0; i < p; ++i) {
                const bool live = s(i) > 0.0;
                beta_lambda_(i) = live ? s(i) / mu(i) * beta0_(i) : 0.0;
                eps_lambda_(i) = live ? xte(i) * detail::pinv_pow(mu(i), -0.5) : 0.0;
            }
        }
    }

private:
    void need_truth() const {
        if (!truth_) throw InputError("operation requires model truth (beta0, sigma2)");
    }

    // Distinct eigenvalues of Σ̂_λ seen by Xᵀy: the null space of X carries no
    // Krylov mass, so only positive s_i are clustered.
    Index count_distinct() const {
        const Vector& s = basis_->s;
        const double gap = 1e-10 * (s_max() + lambda_);
        Index count = 0;
        for (Index i = 0; i < basis_->rank; ++i)
            if (i == 0 || s(i - 1) - s(i) > gap) ++count;
        return count;
    }

    std::shared_ptr<const Dataset> data_;
    std::shared_ptr<const SpectralBasis> basis_;
    std::shared_ptr<const ModelTruth> truth_;
    double lambda_ = 0.0;
    Index p_tilde_ = 0;
    Vector xty_, y_lambda_, beta0_, beta_lambda_, eps_lambda_;
};

/// Spectral decomposition of the penalised empirical covariance. When truth is
/// given, β₀ is replaced by its projection onto the row space of X.
inline PenalisedSpectrum decompose(const Dataset& data, double lambda,
                                   std::optional<ModelTruth> truth = std::nullopt) {
    validate(data);
    detail::require(std::isfinite(lambda) && lambda >= 0.0,
                    "penalty lambda must be finite and non-negative");
    auto shared = std::make_shared<const Dataset>(data);
    auto basis = detail::make_basis(shared->X);
    return PenalisedSpectrum(std::move(shared), std::move(basis), lambda, std::move(truth));
}

/// f(Σ̂_λ) as coordinate-wise multipliers in the eigenbasis.
struct SpectralMap {
    Vector multipliers;

    Vector operator()(const Vector& coords) const {
        return multipliers.cwiseProduct(coords);
    }
    SpectralMap operator*(const SpectralMap& other) const {
        return {multipliers.cwiseProduct(other.multipliers)};
    }
};

template <class F>
SpectralMap apply_filter(const PenalisedSpectrum& spec, F&& f) {
    SpectralMap map{Vector(spec.p())};
    for (Index i = 0; i < spec.p(); ++i) {
        const double v = f(spec.mu(i));
        if (!std::isfinite(v))
            throw NumericalError("filter is not finite at eigenvalue " +
                                 std::to_string(spec.mu(i)));
        map.multipliers(i) = v;
    }
    return map;
}

/// Projection X⁺X β onto the row space of X.
inline Vector min_norm_project(const Dataset& data, const Vector& beta) {
    validate(data);
    detail::require(beta.size() == data.p(), "vector length must equal p");
    const auto basis = detail::make_basis(data.X);
    const auto Vr = basis->V.leftCols(basis->rank);
    return Vr * (Vr.transpose() * beta);
}

} // namespace ridgepath

#endif
