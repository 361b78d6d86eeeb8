#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <pivotal/core/error.hpp>

namespace pivotal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Sorted set of row (feature) indices.
using Support = std::vector<Index>;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

inline bool all_finite(const Eigen::Ref<const Matrix>& m)
{
    return m.allFinite();
}

/// Rejects empty or non-finite matrices, naming the argument in the message.
inline void require_finite(const Eigen::Ref<const Matrix>& m, const char* name)
{
    if (m.rows() < 1 || m.cols() < 1) {
        throw InvalidInput(std::string(name) + ": matrix must have at least one row and one column");
    }
    if (!m.allFinite()) {
        throw InvalidInput(std::string(name) + ": non-finite entry");
    }
}

/// Row-wise l2 norms.
inline Vector row_norms(const Eigen::Ref<const Matrix>& m)
{
    return m.rowwise().norm();
}

/// Sum of the Euclidean norms of the rows.
inline double norm_l21(const Eigen::Ref<const Matrix>& m)
{
    require_finite(m, "norm_l21");
    return m.rowwise().norm().sum();
}

/// Largest Euclidean norm of a row.
inline double norm_l2inf(const Eigen::Ref<const Matrix>& m)
{
    require_finite(m, "norm_l2inf");
    return m.rowwise().norm().maxCoeff();
}

/// Proximal operator of t*||.||_2: (1 - t/||v||)_+ v, exactly zero when ||v|| <= t.
template <class Derived>
typename Derived::PlainObject block_soft_threshold(const Eigen::MatrixBase<Derived>& v, double t)
{
    if (!(t >= 0.0)) throw InvalidInput("block_soft_threshold: threshold must be nonnegative");
    const double nrm = v.norm();
    if (nrm <= t) return Derived::PlainObject::Zero(v.rows(), v.cols());
    return (1.0 - t / nrm) * v;
}

inline double soft_threshold(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// Rows of `m` with nonzero l2 norm.
inline Support row_support(const Eigen::Ref<const Matrix>& m)
{
    Support s;
    for (Index j = 0; j < m.rows(); ++j) {
        if (m.row(j).squaredNorm() > 0.0) s.push_back(j);
    }
    return s;
}

/// Copy of `m` keeping only the rows in `support` (others zeroed).
inline Matrix restrict_rows(const Eigen::Ref<const Matrix>& m, const Support& support)
{
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Index j : support) out.row(j) = m.row(j);
    return out;
}

/// Complement of `support` in [0, p).
inline Support complement(const Support& support, Index p)
{
    std::vector<bool> in(static_cast<std::size_t>(p), false);
    for (Index j : support) in[static_cast<std::size_t>(j)] = true;
    Support out;
    for (Index j = 0; j < p; ++j) {
        if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
    }
    return out;
}

} // namespace pivotal
