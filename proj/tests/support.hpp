#ifndef RIDGEPATH_TESTS_SUPPORT_HPP
#define RIDGEPATH_TESTS_SUPPORT_HPP

#include <random>

#include "ridgepath/ridgepath.hpp"

namespace support {

using ridgepath::Index;
using ridgepath::Matrix;
using ridgepath::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) M(i, j) = z(rng);
    return M;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = z(rng);
    return v;
}

struct Instance {
    ridgepath::Dataset data;
    ridgepath::ModelTruth truth;
    Vector noise;
};

/// Gaussian design with column scales `scales`, y = Xβ₀ + ε.
inline Instance make_instance(Index n, Index p, double sigma2, std::uint64_t seed,
                              const Vector& scales = {}) {
    std::mt19937_64 rng(seed);
    Instance out;
    Matrix X = gaussian_matrix(n, p, rng);
    if (scales.size() == p) X = X * scales.asDiagonal();
    out.truth.beta0 = gaussian_vector(p, rng, 1.0 / std::sqrt(static_cast<double>(p)));
    out.truth.sigma2 = sigma2;
    out.noise = gaussian_vector(n, rng, std::sqrt(sigma2));
    Vector y = X * out.truth.beta0 + out.noise;
    out.data = ridgepath::Dataset{std::move(X), std::move(y)};
    Matrix Sigma = Matrix::Identity(p, p);
    if (scales.size() == p) Sigma = scales.array().square().matrix().asDiagonal();
    out.truth.Sigma = Sigma;
    return out;
}

inline ridgepath::PenalisedSpectrum make_spec(Index n, Index p, double lambda, double sigma2,
                                              std::uint64_t seed) {
    Instance inst = make_instance(n, p, sigma2, seed);
    return ridgepath::decompose(inst.data, lambda, inst.truth);
}

inline double rel(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace support

#endif
