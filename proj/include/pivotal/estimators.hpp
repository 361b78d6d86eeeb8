#pragma once
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <pivotal/core/dataset.hpp>
#include <pivotal/core/matrix.hpp>
#include <pivotal/core/svd.hpp>
#include <pivotal/smoothing.hpp>

namespace pivotal {

enum class EstimatorKind { lasso, mt_lasso, scl, sgcl };

inline std::string to_string(EstimatorKind k)
{
    switch (k) {
        case EstimatorKind::lasso: return "lasso";
        case EstimatorKind::mt_lasso: return "mt_lasso";
        case EstimatorKind::scl: return "scl";
        case EstimatorKind::sgcl: return "sgcl";
    }
    return "?";
}

inline EstimatorKind estimator_kind_from_string(const std::string& s)
{
    if (s == "lasso") return EstimatorKind::lasso;
    if (s == "mt_lasso") return EstimatorKind::mt_lasso;
    if (s == "scl") return EstimatorKind::scl;
    if (s == "sgcl") return EstimatorKind::sgcl;
    throw InvalidInput("unknown estimator kind '" + s + "'");
}

struct SolverControls
{
    double tol = 1e-8;
    std::size_t max_epochs = 50'000;
    std::size_t s_update_every = 10;  // sgcl only
    bool record_objective = false;

    void validate() const
    {
        detail::require(std::isfinite(tol) && tol > 0.0, "tol must be positive");
        detail::require(max_epochs >= 1, "max_epochs must be at least 1");
        detail::require(s_update_every >= 1, "s_update_every must be at least 1");
    }
};

struct EstimatorSpec
{
    EstimatorKind kind = EstimatorKind::scl;
    double lambda = 0.1;
    double sigma_min = 1e-3;
    double sigma_max = infinity;
    SolverControls controls{};

    void validate() const
    {
        detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
        if (kind == EstimatorKind::scl || kind == EstimatorKind::sgcl) {
            detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min must be positive");
        }
        if (kind == EstimatorKind::sgcl) {
            detail::require(std::isfinite(sigma_max) && sigma_max >= sigma_min,
                            "sigma_max must be finite and satisfy sigma_min <= sigma_max");
        }
        controls.validate();
    }
};

struct FitResult
{
    EstimatorKind kind = EstimatorKind::lasso;
    Matrix coef;                        // p x q
    std::optional<double> sigma;        // scl
    std::optional<Matrix> noise_root;   // sgcl, n x n SPD
    Matrix residuals;                   // Y - X coef
    double objective = 0.0;
    std::size_t epochs = 0;
    double kkt_violation = 0.0;         // relative to lambda (plus noise fixed-point residual)
    bool converged = false;
    std::vector<double> objective_trace;  // per epoch, when requested
};

namespace detail {

inline void check_design(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y)
{
    require_finite(x, "X");
    require_finite(y, "Y");
    require(x.rows() == y.rows(), "X and Y must have the same number of rows");
}

inline Matrix initial_coef(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                           const std::optional<Matrix>& warm_start)
{
    if (!warm_start) return Matrix::Zero(x.cols(), y.cols());
    require(warm_start->rows() == x.cols() && warm_start->cols() == y.cols(), "warm start has the wrong shape");
    require_finite(*warm_start, "warm start");
    return *warm_start;
}

/**
 * Worst row-wise stationarity violation of
 *   grad_j + lambda * d||B_j||  contains 0,
 * where `corr` holds the negative gradient rows. Returned relative to lambda.
 */
inline double stationarity_violation(const Matrix& corr, const Matrix& coef, double lambda)
{
    double worst = 0.0;
    for (Index j = 0; j < coef.rows(); ++j) {
        const double nb = coef.row(j).norm();
        double v;
        if (nb > 0.0) {
            v = (corr.row(j) - lambda * coef.row(j) / nb).norm();
        } else {
            v = std::max(0.0, corr.row(j).norm() - lambda);
        }
        worst = std::max(worst, v);
    }
    return worst / lambda;
}

} // namespace detail

/// (1 / 2n) ||y - X b||^2 + lambda ||b||_1
inline double lasso_objective(const Eigen::Ref<const Matrix>& residuals, const Eigen::Ref<const Matrix>& coef,
                              double lambda)
{
    const double n = static_cast<double>(residuals.rows());
    return residuals.squaredNorm() / (2.0 * n) + lambda * coef.cwiseAbs().sum();
}

/// (1 / 2nq) ||Y - X B||_F^2 + lambda ||B||_{2,1}
inline double mt_lasso_objective(const Eigen::Ref<const Matrix>& residuals, const Eigen::Ref<const Matrix>& coef,
                                 double lambda)
{
    const double nq = static_cast<double>(residuals.rows() * residuals.cols());
    return residuals.squaredNorm() / (2.0 * nq) + lambda * coef.rowwise().norm().sum();
}

/// ||R||_F^2 / (2 nq sigma) + sigma / 2 + lambda ||B||_{2,1}
inline double scl_objective(const Eigen::Ref<const Matrix>& residuals, const Eigen::Ref<const Matrix>& coef,
                            double sigma, double lambda)
{
    const double nq = static_cast<double>(residuals.rows() * residuals.cols());
    return residuals.squaredNorm() / (2.0 * nq * sigma) + sigma / 2.0 + lambda * coef.rowwise().norm().sum();
}

/// ||R||^2_{S^-1} / (2nq) + Tr(S) / (2n) + lambda ||B||_{2,1}
inline double sgcl_objective(const Eigen::Ref<const Matrix>& residuals, const Eigen::Ref<const Matrix>& coef,
                             const Eigen::Ref<const Matrix>& noise_root, double lambda)
{
    return concomitant_matrix_datafit(residuals, noise_root) + lambda * coef.rowwise().norm().sum();
}

/**
 * Lasso by cyclic coordinate descent with scalar soft-thresholding.
 * Requires a single task (Y has one column).
 */
inline FitResult fit_lasso(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, double lambda,
                           const SolverControls& controls = {}, const std::optional<Matrix>& warm_start = std::nullopt)
{
    detail::check_design(x, y);
    detail::require(y.cols() == 1, "fit_lasso: Y must have a single column (q = 1)");
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
    controls.validate();

    const Index n = x.rows(), p = x.cols();
    const double nd = static_cast<double>(n);
    Vector beta = detail::initial_coef(x, y, warm_start).col(0);
    Vector r = y.col(0) - x * beta;
    const Vector col_sq = x.colwise().squaredNorm().transpose();

    FitResult fit;
    fit.kind = EstimatorKind::lasso;
    for (std::size_t epoch = 1; epoch <= controls.max_epochs; ++epoch) {
        for (Index j = 0; j < p; ++j) {
            if (col_sq(j) == 0.0) continue;
            const double old = beta(j);
            const double z = old + x.col(j).dot(r) / col_sq(j);
            const double updated = soft_threshold(z, nd * lambda / col_sq(j));
            if (updated != old) {
                r.noalias() -= (updated - old) * x.col(j);
                beta(j) = updated;
            }
        }
        fit.epochs = epoch;
        if (controls.record_objective) fit.objective_trace.push_back(lasso_objective(r, beta, lambda));

        const Vector corr = x.transpose() * r / nd;
        double worst = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double v = beta(j) != 0.0 ? std::abs(corr(j) - lambda * (beta(j) > 0.0 ? 1.0 : -1.0))
                                            : std::max(0.0, std::abs(corr(j)) - lambda);
            worst = std::max(worst, v);
        }
        fit.kkt_violation = worst / lambda;
        if (fit.kkt_violation <= controls.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = beta;
    fit.residuals = r;
    fit.objective = lasso_objective(r, beta, lambda);
    return fit;
}

namespace detail {

/// One cyclic pass of exact block updates B_j <- BST(B_j + X_j^T R / d_j, thresh_scale / d_j).
/// `wx` is the weighted design (W X) and `diag` holds d_j = X_j^T W X_j.
inline void bcd_epoch(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& wx, const Vector& diag,
                      double thresh_scale, Matrix& coef, Matrix& residuals)
{
    for (Index j = 0; j < coef.rows(); ++j) {
        if (!(diag(j) > 0.0)) continue;
        const RowVector old = coef.row(j);
        const RowVector grad = wx.col(j).transpose() * residuals;
        const RowVector updated = block_soft_threshold(old + grad / diag(j), thresh_scale / diag(j));
        const RowVector delta = updated - old;
        if (delta.squaredNorm() > 0.0) {
            residuals.noalias() -= x.col(j) * delta;
            coef.row(j) = updated;
        }
    }
}

} // namespace detail

/**
 * Multitask Lasso, (1/2nq)||Y - XB||_F^2 + lambda ||B||_{2,1}, by cyclic block
 * coordinate descent with incremental residuals.
 */
inline FitResult fit_mt_lasso(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, double lambda,
                              const SolverControls& controls = {},
                              const std::optional<Matrix>& warm_start = std::nullopt)
{
    detail::check_design(x, y);
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
    controls.validate();

    const double nq = static_cast<double>(x.rows() * y.cols());
    Matrix coef = detail::initial_coef(x, y, warm_start);
    Matrix r = y - x * coef;
    const Vector col_sq = x.colwise().squaredNorm().transpose();

    FitResult fit;
    fit.kind = EstimatorKind::mt_lasso;
    for (std::size_t epoch = 1; epoch <= controls.max_epochs; ++epoch) {
        detail::bcd_epoch(x, x, col_sq, nq * lambda, coef, r);
        fit.epochs = epoch;
        if (controls.record_objective) fit.objective_trace.push_back(mt_lasso_objective(r, coef, lambda));

        const Matrix corr = x.transpose() * r / nq;
        fit.kkt_violation = detail::stationarity_violation(corr, coef, lambda);
        if (fit.kkt_violation <= controls.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = std::move(coef);
    fit.residuals = std::move(r);
    fit.objective = mt_lasso_objective(fit.residuals, fit.coef, lambda);
    return fit;
}

/**
 * Smoothed (multitask) concomitant Lasso:
 *   min_{B, sigma >= sigma_min} ||Y - XB||_F^2 / (2 nq sigma) + sigma / 2 + lambda ||B||_{2,1}.
 * Alternates one BCD epoch in B at fixed sigma with sigma <- max(sigma_min, ||R||_F / sqrt(nq)).
 */
inline FitResult fit_scl(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, double lambda,
                         double sigma_min, const SolverControls& controls = {},
                         const std::optional<Matrix>& warm_start = std::nullopt)
{
    detail::check_design(x, y);
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
    detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min must be positive");
    controls.validate();

    const double nq = static_cast<double>(x.rows() * y.cols());
    const double sqrt_nq = std::sqrt(nq);
    Matrix coef = detail::initial_coef(x, y, warm_start);
    Matrix r = y - x * coef;
    const Vector col_sq = x.colwise().squaredNorm().transpose();
    double sigma = std::max(sigma_min, r.norm() / sqrt_nq);

    FitResult fit;
    fit.kind = EstimatorKind::scl;
    for (std::size_t epoch = 1; epoch <= controls.max_epochs; ++epoch) {
        detail::bcd_epoch(x, x, col_sq, nq * sigma * lambda, coef, r);
        const double sigma_new = std::max(sigma_min, r.norm() / sqrt_nq);
        const double sigma_residual = std::abs(sigma_new - sigma) / sigma_new;
        sigma = sigma_new;
        fit.epochs = epoch;
        if (controls.record_objective) fit.objective_trace.push_back(scl_objective(r, coef, sigma, lambda));

        const Matrix corr = x.transpose() * r / (nq * sigma);
        const double stat = detail::stationarity_violation(corr, coef, lambda);
        fit.kkt_violation = std::max(stat, sigma_residual);
        // sigma has just been set to its exact minimizer, so stationarity in B at this
        // sigma is the joint optimality condition.
        if (stat <= controls.tol) {
            fit.kkt_violation = stat;
            fit.converged = true;
            break;
        }
    }
    fit.coef = std::move(coef);
    fit.residuals = std::move(r);
    fit.sigma = sigma;
    fit.objective = scl_objective(fit.residuals, fit.coef, sigma, lambda);
    return fit;
}

/**
 * Smoothed generalized concomitant Lasso:
 *   min_{B, sigma_min <= S <= sigma_max} ||Y - XB||^2_{S^-1} / (2nq) + Tr(S) / (2n) + lambda ||B||_{2,1}.
 * BCD epochs in B at fixed S with weights W = S^-1; S is refreshed by its closed form
 * every `s_update_every` epochs, or as soon as B is stationary for the current S.
 */
inline FitResult fit_sgcl(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, double lambda,
                          double sigma_min, double sigma_max, const SolverControls& controls = {},
                          const std::optional<Matrix>& warm_start = std::nullopt)
{
    detail::check_design(x, y);
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
    const SmoothingParams params{sigma_min, sigma_max};
    params.validate();
    detail::require(std::isfinite(sigma_max), "fit_sgcl: sigma_max must be finite");
    controls.validate();

    const double nq = static_cast<double>(x.rows() * y.cols());
    Matrix coef = detail::initial_coef(x, y, warm_start);
    Matrix r = y - x * coef;

    Matrix s = optimal_covariance_root(r, params);
    Matrix wx;
    Vector diag;
    auto refresh_weights = [&]() {
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success) throw NumericError("fit_sgcl: noise root lost positive definiteness");
        wx = llt.solve(x);
        diag = (x.array() * wx.array()).colwise().sum().transpose();
    };
    refresh_weights();

    FitResult fit;
    fit.kind = EstimatorKind::sgcl;
    for (std::size_t epoch = 1; epoch <= controls.max_epochs; ++epoch) {
        detail::bcd_epoch(x, wx, diag, nq * lambda, coef, r);
        fit.epochs = epoch;

        double stat = detail::stationarity_violation(wx.transpose() * r / nq, coef, lambda);
        const bool refresh = (epoch % controls.s_update_every == 0) || stat <= controls.tol;
        double s_residual = 0.0;
        if (refresh) {
            Matrix s_new = optimal_covariance_root(r, params);
            s_residual = (s_new - s).norm() / s_new.norm();
            s = std::move(s_new);
            refresh_weights();
            stat = detail::stationarity_violation(wx.transpose() * r / nq, coef, lambda);
        }
        if (controls.record_objective) fit.objective_trace.push_back(sgcl_objective(r, coef, s, lambda));
        fit.kkt_violation = std::max(stat, s_residual);
        if (refresh && stat <= controls.tol && s_residual <= controls.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = std::move(coef);
    fit.residuals = std::move(r);
    fit.objective = sgcl_objective(fit.residuals, fit.coef, s, lambda);
    fit.noise_root = std::move(s);
    return fit;
}

/// Dispatch on `spec.kind`.
inline FitResult fit(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y, const EstimatorSpec& spec,
                     const std::optional<Matrix>& warm_start = std::nullopt)
{
    spec.validate();
    switch (spec.kind) {
        case EstimatorKind::lasso: return fit_lasso(x, y, spec.lambda, spec.controls, warm_start);
        case EstimatorKind::mt_lasso: return fit_mt_lasso(x, y, spec.lambda, spec.controls, warm_start);
        case EstimatorKind::scl: return fit_scl(x, y, spec.lambda, spec.sigma_min, spec.controls, warm_start);
        case EstimatorKind::sgcl:
            return fit_sgcl(x, y, spec.lambda, spec.sigma_min, spec.sigma_max, spec.controls, warm_start);
    }
    throw InvalidInput("unknown estimator kind");
}

/**
 * Smallest lambda for which B = 0 is optimal.
 *   lasso:    ||X^T y||_inf / n
 *   mt_lasso: ||X^T Y||_{2,inf} / (nq)
 *   scl:      ||X^T Y||_{2,inf} / (nq max(sigma_min, ||Y||_F / sqrt(nq)))
 *   sgcl:     ||X^T S0^-1 Y||_{2,inf} / (nq), S0 = optimal_covariance_root(Y)
 */
inline double lambda_max(EstimatorKind kind, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                         double sigma_min = 0.0, double sigma_max = infinity)
{
    detail::check_design(x, y);
    const double n = static_cast<double>(x.rows());
    const double nq = static_cast<double>(x.rows() * y.cols());
    double value = 0.0;
    switch (kind) {
        case EstimatorKind::lasso:
            detail::require(y.cols() == 1, "lambda_max(lasso): Y must have a single column");
            value = (x.transpose() * y).cwiseAbs().maxCoeff() / n;
            break;
        case EstimatorKind::mt_lasso:
            value = (x.transpose() * y).rowwise().norm().maxCoeff() / nq;
            break;
        case EstimatorKind::scl: {
            detail::require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min must be positive");
            const double sigma = std::max(sigma_min, y.norm() / std::sqrt(nq));
            value = (x.transpose() * y).rowwise().norm().maxCoeff() / (nq * sigma);
            break;
        }
        case EstimatorKind::sgcl: {
            const SmoothingParams params{sigma_min, sigma_max};
            params.validate();
            detail::require(std::isfinite(sigma_max), "sigma_max must be finite");
            const Matrix s0 = optimal_covariance_root(y, params);
            value = (x.transpose() * s0.llt().solve(y)).rowwise().norm().maxCoeff() / nq;
            break;
        }
    }
    detail::require(value > 0.0, "lambda_max: degenerate data (X^T Y = 0), no positive lambda_max");
    return value;
}

/**
 * Noise-free regularization level.
 *   q > 1: (2 sqrt 2 / sqrt(nq)) (1 + A sqrt(log p / q)), requires A > sqrt 2.
 *   q = 1: A sqrt(2 log p / n), requires A > 2 sqrt 2.
 */
inline double proposed_lambda(Index n, Index q, Index p, double a)
{
    detail::require(n >= 1 && q >= 1 && p >= 1, "proposed_lambda: n, q, p must be positive");
    const double logp = std::log(static_cast<double>(p));
    if (q == 1) {
        detail::require(a > 2.0 * std::sqrt(2.0), "proposed_lambda: single task requires A > 2*sqrt(2)");
        return a * std::sqrt(2.0 * logp / static_cast<double>(n));
    }
    detail::require(a > std::sqrt(2.0), "proposed_lambda: multitask requires A > sqrt(2)");
    const double nq = static_cast<double>(n * q);
    return 2.0 * std::sqrt(2.0) / std::sqrt(nq) * (1.0 + a * std::sqrt(logp / static_cast<double>(q)));
}

/// sigma_min used to realize the unsmoothed estimators: 1e-6 ||Y||_F / sqrt(nq).
inline double unsmoothed_sigma_min(const Eigen::Ref<const Matrix>& y)
{
    return 1e-6 * y.norm() / std::sqrt(static_cast<double>(y.rows() * y.cols()));
}

/// sigma_max used for the matrix proxy: 10 ||(Y Y^T / q)^{1/2}||_2.
inline double unsmoothed_sigma_max(const Eigen::Ref<const Matrix>& y)
{
    return 10.0 * norm_spectral(y / std::sqrt(static_cast<double>(y.cols())));
}

// Dataset overloads

inline FitResult fit_lasso(const Dataset& d, double lambda, const SolverControls& controls = {},
                           const std::optional<Matrix>& warm_start = std::nullopt)
{
    return fit_lasso(d.x, d.y, lambda, controls, warm_start);
}

inline FitResult fit_mt_lasso(const Dataset& d, double lambda_eff, const SolverControls& controls = {},
                              const std::optional<Matrix>& warm_start = std::nullopt)
{
    return fit_mt_lasso(d.x, d.y, lambda_eff, controls, warm_start);
}

inline FitResult fit_scl(const Dataset& d, double lambda, double sigma_min, const SolverControls& controls = {},
                         const std::optional<Matrix>& warm_start = std::nullopt)
{
    return fit_scl(d.x, d.y, lambda, sigma_min, controls, warm_start);
}

inline FitResult fit_sgcl(const Dataset& d, double lambda, double sigma_min, double sigma_max,
                          const SolverControls& controls = {}, const std::optional<Matrix>& warm_start = std::nullopt)
{
    return fit_sgcl(d.x, d.y, lambda, sigma_min, sigma_max, controls, warm_start);
}

inline double lambda_max(EstimatorKind kind, const Dataset& d, double sigma_min = 0.0, double sigma_max = infinity)
{
    return lambda_max(kind, d.x, d.y, sigma_min, sigma_max);
}

} // namespace pivotal
