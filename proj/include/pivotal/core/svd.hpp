#pragma once
#include <string>

#include <Eigen/SVD>

#include <pivotal/core/matrix.hpp>

namespace pivotal {

/// Thin SVD M = U diag(singular_values) V^T with r = min(rows, cols).
struct SvdFactors
{
    Matrix U;                // rows x r
    Vector singular_values;  // nonincreasing, nonnegative
    Matrix V;                // cols x r
};

/// Largest side handled by `svd`; the dense Jacobi sweep is cubic.
inline constexpr Index svd_max_min_dim = 256;

/**
 * Thin singular value decomposition.
 *
 * Backed by Eigen's two-sided Jacobi SVD, which is deterministic for a given
 * input. Signs are normalized so that the first nonzero entry of every left
 * singular vector is nonnegative (the matching right vector is flipped too).
 * Tiny singular values are returned as computed; callers choose rank cutoffs.
 */
inline SvdFactors svd(const Eigen::Ref<const Matrix>& m)
{
    require_finite(m, "svd");
    const Index r = std::min(m.rows(), m.cols());
    if (r > svd_max_min_dim) {
        throw InvalidInput("svd: min(rows, cols) = " + std::to_string(r) + " exceeds " +
                           std::to_string(svd_max_min_dim));
    }

    Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) {
        throw NumericError("svd: Jacobi iteration failed on a " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + " matrix");
    }

    SvdFactors out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
    if (!out.U.allFinite() || !out.V.allFinite() || !out.singular_values.allFinite()) {
        throw NumericError("svd: non-finite factors for a " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + " matrix");
    }

    for (Index i = 0; i < r; ++i) {
        for (Index k = 0; k < out.U.rows(); ++k) {
            const double u = out.U(k, i);
            if (u == 0.0) continue;
            if (u < 0.0) {
                out.U.col(i) *= -1.0;
                out.V.col(i) *= -1.0;
            }
            break;
        }
    }
    return out;
}

inline Vector singular_values(const Eigen::Ref<const Matrix>& m)
{
    return svd(m).singular_values;
}

/// Sum of singular values.
inline double norm_nuclear(const Eigen::Ref<const Matrix>& m)
{
    return singular_values(m).sum();
}

/// Largest singular value.
inline double norm_spectral(const Eigen::Ref<const Matrix>& m)
{
    return singular_values(m)(0);
}

} // namespace pivotal
