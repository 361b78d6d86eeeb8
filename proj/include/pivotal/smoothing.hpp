#pragma once
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include <pivotal/core/matrix.hpp>
#include <pivotal/core/svd.hpp>
#include <pivotal/random.hpp>

namespace pivotal {

/// Bounds on the noise level (scalar) or on the spectrum of the noise root (matrix).
struct SmoothingParams
{
    double sigma_min = 1.0;
    double sigma_max = infinity;  // +inf: lower clipping only

    void validate() const
    {
        detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min must be a positive finite number");
        detail::require(!std::isnan(sigma_max) && sigma_max >= sigma_min, "sigma_max must satisfy sigma_min <= sigma_max");
    }
};

inline double clip(double x, double lo, double hi)
{
    return std::max(lo, std::min(x, hi));
}

/// min over sigma >= sigma_min of ||Z||_F^2 / (2 sigma) + sigma / 2 (Huber-like in ||Z||_F).
inline double smoothed_frobenius(const Eigen::Ref<const Matrix>& z, double sigma_min)
{
    require_finite(z, "smoothed_frobenius");
    detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "smoothed_frobenius: sigma_min must be positive");
    const double nrm = z.norm();
    if (nrm >= sigma_min) return nrm;
    return nrm * nrm / (2.0 * sigma_min) + sigma_min / 2.0;
}

/// Minimizer of the scalar concomitant problem: max(sigma_min, ||Z||_F).
inline double optimal_sigma(const Eigen::Ref<const Matrix>& z, double sigma_min)
{
    require_finite(z, "optimal_sigma");
    detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "optimal_sigma: sigma_min must be positive");
    return std::max(sigma_min, z.norm());
}

/// gamma^2 / (2c) + c / 2 with c = clip(gamma, sigma_min, sigma_max).
inline double clipped_spectral_value(double gamma, const SmoothingParams& params)
{
    const double c = clip(gamma, params.sigma_min, params.sigma_max);
    return gamma * gamma / (2.0 * c) + c / 2.0;
}

/**
 * Optimal square root of the noise covariance for the matrix concomitant problem:
 * S = U diag(clip(gamma_i, sigma_min, sigma_max)) U^T where U diag(gamma) V^T is
 * the SVD of R / sqrt(q) (q = R.cols() when `q_scale`, else 1). Directions outside
 * the range of U carry gamma = 0 and clip to sigma_min.
 */
inline Matrix optimal_covariance_root(const Eigen::Ref<const Matrix>& residuals, bool q_scale,
                                      const SmoothingParams& params)
{
    params.validate();
    detail::require(std::isfinite(params.sigma_max), "optimal_covariance_root: sigma_max must be finite");
    require_finite(residuals, "optimal_covariance_root");

    const double scale = q_scale ? 1.0 / std::sqrt(static_cast<double>(residuals.cols())) : 1.0;
    const SvdFactors f = svd(residuals * scale);

    Vector shift(f.singular_values.size());
    for (Index i = 0; i < shift.size(); ++i) {
        shift(i) = clip(f.singular_values(i), params.sigma_min, params.sigma_max) - params.sigma_min;
    }
    Matrix s = f.U * shift.asDiagonal() * f.U.transpose();
    s.diagonal().array() += params.sigma_min;
    // exact symmetry
    return 0.5 * (s + s.transpose());
}

inline Matrix optimal_covariance_root(const Eigen::Ref<const Matrix>& residuals, const SmoothingParams& params)
{
    return optimal_covariance_root(residuals, true, params);
}

/**
 * Value of min over sigma_min <= S <= sigma_max of
 *   ||R||^2_{S^-1} / (2nq) + Tr(S) / (2n),
 * computed as (1/n) sum_i h(gamma_i) over the n singular values of R / sqrt(q)
 * (zero-padded when q < n).
 */
inline double smoothed_nuclear(const Eigen::Ref<const Matrix>& residuals, const SmoothingParams& params)
{
    params.validate();
    require_finite(residuals, "smoothed_nuclear");
    const Index n = residuals.rows();
    const double q = static_cast<double>(residuals.cols());
    const Vector gamma = singular_values(residuals / std::sqrt(q));
    double total = 0.0;
    for (Index i = 0; i < gamma.size(); ++i) total += clipped_spectral_value(gamma(i), params);
    total += static_cast<double>(n - gamma.size()) * clipped_spectral_value(0.0, params);
    return total / static_cast<double>(n);
}

/// ||R||^2_{S^-1} / (2nq) + Tr(S) / (2n) for a given SPD S.
inline double concomitant_matrix_datafit(const Eigen::Ref<const Matrix>& residuals, const Eigen::Ref<const Matrix>& s)
{
    const double n = static_cast<double>(residuals.rows());
    const double q = static_cast<double>(residuals.cols());
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericError("concomitant_matrix_datafit: S is not positive definite");
    const double quad = (residuals.array() * llt.solve(residuals).array()).sum();
    return quad / (2.0 * n * q) + s.trace() / (2.0 * n);
}

/// ||Z||_F^2 / (2 sigma) + sigma / 2.
inline double concomitant_scalar_datafit(const Eigen::Ref<const Matrix>& z, double sigma)
{
    return z.squaredNorm() / (2.0 * sigma) + sigma / 2.0;
}

// ---------------------------------------------------------------------------
// Brute-force oracles. They do not use the closed forms above.

/// Golden-section search of sigma -> ||Z||^2/(2 sigma) + sigma/2 on [sigma_min, sigma_min + 10(1 + ||Z||)].
inline double smoothed_frobenius_oracle(const Eigen::Ref<const Matrix>& z, double sigma_min)
{
    detail::require(sigma_min > 0.0, "smoothed_frobenius_oracle: sigma_min must be positive");
    const double sq = z.squaredNorm();
    auto f = [sq](double s) { return sq / (2.0 * s) + s / 2.0; };
    double a = sigma_min;
    double b = sigma_min + 10.0 * (1.0 + std::sqrt(sq));
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-12 * std::max(1.0, a)) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    return std::min({f(a), f(b), f(0.5 * (a + b))});
}

namespace detail {

/// Projection of a symmetric matrix onto {sigma_min <= eig <= sigma_max}.
inline Matrix project_spectrum(const Matrix& s, const SmoothingParams& params)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    Vector ev = es.eigenvalues();
    for (Index i = 0; i < ev.size(); ++i) ev(i) = clip(ev(i), params.sigma_min, params.sigma_max);
    Matrix out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

} // namespace detail

/**
 * Projected gradient descent with backtracking over the spectrally clipped SPD set,
 * restarted from `starts` random SPD points; returns the best objective found.
 * Intended for small instances (n, q <= 8).
 */
inline double smoothed_nuclear_oracle(const Eigen::Ref<const Matrix>& residuals, const SmoothingParams& params,
                                      int starts = 20, std::uint64_t seed = 0)
{
    params.validate();
    const Index n = residuals.rows();
    const double nd = static_cast<double>(n);
    const double q = static_cast<double>(residuals.cols());
    const Matrix rrt = residuals * residuals.transpose();

    // Finite upper clip for the search box; with sigma_max = inf use a bound beyond any optimum.
    SmoothingParams box = params;
    if (!std::isfinite(box.sigma_max)) {
        box.sigma_max = std::max(params.sigma_min, std::sqrt(rrt.trace() / q)) * 2.0 + 1.0;
    }

    auto objective = [&](const Matrix& s) { return concomitant_matrix_datafit(residuals, s); };
    auto gradient = [&](const Matrix& s) {
        const Matrix inv = s.inverse();
        Matrix g = -(inv * rrt * inv) / (2.0 * nd * q);
        g.diagonal().array() += 1.0 / (2.0 * nd);
        return Matrix(0.5 * (g + g.transpose()));
    };

    CounterRng rng(seed, 0x5eed);
    double best = std::numeric_limits<double>::infinity();
    for (int start = 0; start < starts; ++start) {
        const Matrix a = rng.gaussian_matrix(n, n);
        Matrix s = detail::project_spectrum(a * a.transpose() + box.sigma_min * Matrix::Identity(n, n), box);
        double fs = objective(s);
        double step = 1.0;
        for (int it = 0; it < 20000; ++it) {
            const Matrix g = gradient(s);
            bool moved = false;
            for (int bt = 0; bt < 60; ++bt) {
                const Matrix cand = detail::project_spectrum(s - step * g, box);
                const double fc = objective(cand);
                const double decrease = (s - cand).squaredNorm() / (2.0 * step);
                if (fc <= fs - 0.5 * decrease || fc < fs) {
                    const double delta = fs - fc;
                    s = cand;
                    fs = fc;
                    moved = delta > 1e-16 * std::abs(fs);
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        best = std::min(best, fs);
    }
    return best;
}

} // namespace pivotal
