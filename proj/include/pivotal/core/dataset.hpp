#pragma once
#include <cmath>
#include <optional>
#include <string>

#include <pivotal/core/matrix.hpp>

namespace pivotal {

/// Column scaling applied to the design.
enum class Normalization {
    sqrt_n,  // ||X_j||_2 = sqrt(n), i.e. unit diagonal Gram matrix X^T X / n
    unit,    // ||X_j||_2 = 1
};

inline std::string to_string(Normalization v)
{
    return v == Normalization::sqrt_n ? "sqrt_n" : "unit";
}

inline Normalization normalization_from_string(const std::string& s)
{
    if (s == "sqrt_n") return Normalization::sqrt_n;
    if (s == "unit") return Normalization::unit;
    throw InvalidInput("unknown normalization '" + s + "'");
}

struct GroundTruth
{
    Matrix coef;     // p x q
    double sigma = 1.0;
    Support support;  // rows of coef with nonzero norm
};

struct Dataset
{
    Matrix x;  // n x p
    Matrix y;  // n x q
    std::optional<GroundTruth> truth;
    Normalization normalization = Normalization::sqrt_n;

    Index n() const { return x.rows(); }
    Index p() const { return x.cols(); }
    Index q() const { return y.cols(); }

    void validate() const
    {
        require_finite(x, "dataset X");
        require_finite(y, "dataset Y");
        detail::require(x.rows() == y.rows(), "dataset: X and Y must have the same number of rows");
        const double target = normalization == Normalization::sqrt_n ? std::sqrt(static_cast<double>(n())) : 1.0;
        for (Index j = 0; j < p(); ++j) {
            if (std::abs(x.col(j).norm() - target) > 1e-10 * target) {
                throw InvalidInput("dataset: column " + std::to_string(j) + " is not scaled as '" +
                                   to_string(normalization) + "'");
            }
        }
        if (truth) {
            detail::require(truth->coef.rows() == p() && truth->coef.cols() == q(),
                            "dataset: ground-truth coefficients must be p x q");
            detail::require(truth->sigma > 0.0, "dataset: sigma_star must be positive");
            detail::require(truth->support == row_support(truth->coef),
                            "dataset: support_star must equal the nonzero rows of B_star");
        }
    }
};

/// Rescales every column of `x` to the norm required by `normalization`.
inline Matrix normalize_columns(Matrix x, Normalization normalization)
{
    const double target = normalization == Normalization::sqrt_n ? std::sqrt(static_cast<double>(x.rows())) : 1.0;
    for (Index j = 0; j < x.cols(); ++j) {
        const double nrm = x.col(j).norm();
        if (nrm > 0.0) x.col(j) *= target / nrm;
    }
    return x;
}

} // namespace pivotal
