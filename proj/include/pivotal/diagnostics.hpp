#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include <pivotal/core/dataset.hpp>
#include <pivotal/core/serialize.hpp>
#include <pivotal/core/matrix.hpp>
#include <pivotal/core/svd.hpp>
#include <pivotal/estimators.hpp>
#include <pivotal/random.hpp>

namespace pivotal {

// ---------------------------------------------------------------------------
// Design conditions

/// X^T X / n
inline Matrix gram(const Eigen::Ref<const Matrix>& x)
{
    return x.transpose() * x / static_cast<double>(x.rows());
}

/**
 * Largest alpha for which max_{j != j'} |Psi_jj'| <= 1 / (7 alpha s) holds,
 * i.e. 1 / (7 s m) with m the largest off-diagonal Gram entry (+inf when m = 0).
 * Columns must satisfy Psi_jj = 1 within 1e-8.
 */
inline double incoherence_alpha(const Eigen::Ref<const Matrix>& x, Index s)
{
    require_finite(x, "incoherence_alpha");
    detail::require(s >= 1, "incoherence_alpha: s must be at least 1");
    const Matrix psi = gram(x);
    for (Index j = 0; j < psi.rows(); ++j) {
        if (std::abs(psi(j, j) - 1.0) > 1e-8) {
            throw InvalidInput("incoherence_alpha: column " + std::to_string(j) +
                               " is not normalized (||X_j||^2 / n = " + std::to_string(psi(j, j)) + ")");
        }
    }
    double m = 0.0;
    for (Index j = 0; j < psi.rows(); ++j)
        for (Index k = 0; k < psi.cols(); ++k)
            if (j != k) m = std::max(m, std::abs(psi(j, k)));
    if (m == 0.0) return infinity;
    return 1.0 / (7.0 * static_cast<double>(s) * m);
}

/// 1 + 16 / (7 (alpha - 1)), the l_{2,inf} amplification factor under incoherence.
inline double incoherence_constant(double alpha)
{
    detail::require(alpha > 1.0, "alpha must be greater than 1");
    if (std::isinf(alpha)) return 1.0;
    return 1.0 + 16.0 / (7.0 * (alpha - 1.0));
}

/// ||Delta_{S^c}||_{2,1} / ||Delta_S||_{2,1}; +inf when only the off-support part is nonzero, 0 when both vanish.
inline double cone_ratio(const Eigen::Ref<const Matrix>& delta, const Support& support)
{
    const Vector norms = row_norms(delta);
    double in = 0.0, total = norms.sum();
    for (Index j : support) in += norms(j);
    const double out = std::max(0.0, total - in);
    if (in == 0.0) return out == 0.0 ? 0.0 : infinity;
    return out / in;
}

namespace detail {

inline double rep_value(const Eigen::Ref<const Matrix>& x, const Matrix& delta, const Support& support)
{
    double in_sq = 0.0;
    for (Index j : support) in_sq += delta.row(j).squaredNorm();
    return (x * delta).norm() / (std::sqrt(static_cast<double>(x.rows())) * std::sqrt(in_sq));
}

/// Pulls the off-support mass back onto the cone boundary when it exceeds 3 ||Delta_S||_{2,1}.
inline void retract_to_cone(Matrix& delta, const Support& support, const Support& off)
{
    double in = 0.0, out = 0.0;
    for (Index j : support) in += delta.row(j).norm();
    for (Index j : off) out += delta.row(j).norm();
    if (out > 3.0 * in && out > 0.0) {
        const double scale = 3.0 * in / out;
        for (Index j : off) delta.row(j) *= scale;
    }
}

} // namespace detail

/**
 * Randomized upper bound on the restricted eigenvalue constant
 *   min over the cone ||Delta_{S^c}||_{2,1} <= 3 ||Delta_S||_{2,1} of ||X Delta||_F / (sqrt(n) ||Delta_S||_F).
 * Draws `trials` random cone directions, then refines the best few by an
 * adaptive random local search that stays on the cone.
 */
inline double rep_ratio(const Eigen::Ref<const Matrix>& x, const Support& support, std::size_t trials,
                        std::uint64_t seed, Index q = 1)
{
    require_finite(x, "rep_ratio");
    detail::require(!support.empty(), "rep_ratio: support must be nonempty");
    detail::require(trials >= 1, "rep_ratio: trials must be positive");
    const Index p = x.cols();
    const Support off = complement(support, p);
    CounterRng rng(seed, 0x4e9);

    auto random_cone_point = [&]() {
        Matrix d = Matrix::Zero(p, q);
        for (Index j : support) d.row(j) = rng.gaussian_matrix(1, q);
        if (!off.empty()) {
            Matrix o = Matrix::Zero(p, q);
            // sparse off-support directions are where the ratio is smallest
            const Index k = 1 + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(off.size())));
            for (Index idx : sample_without_replacement(rng, static_cast<Index>(off.size()), k))
                o.row(off[static_cast<std::size_t>(idx)]) = rng.gaussian_matrix(1, q);
            double in = 0.0, out = 0.0;
            for (Index j : support) in += d.row(j).norm();
            for (Index j : off) out += o.row(j).norm();
            if (out > 0.0) d += o * (3.0 * in * rng.uniform() / out);
        }
        return d;
    };

    std::vector<std::pair<double, Matrix>> best;
    const std::size_t keep = 8;
    for (std::size_t t = 0; t < trials; ++t) {
        Matrix d = random_cone_point();
        const double v = detail::rep_value(x, d, support);
        if (best.size() < keep || v < best.back().first) {
            best.emplace_back(v, std::move(d));
            std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (best.size() > keep) best.pop_back();
        }
    }

    double result = best.front().first;
    for (auto& [value, d] : best) {
        double step = 0.5 * d.norm();
        double current = value;
        for (int it = 0; it < 2000 && step > 1e-9 * d.norm(); ++it) {
            Matrix cand = d + step * rng.gaussian_matrix(p, q) / std::sqrt(static_cast<double>(p * q));
            detail::retract_to_cone(cand, support, off);
            const double v = detail::rep_value(x, cand, support);
            if (v < current) {
                current = v;
                d = cand / cand.norm();
                step = std::min(2.0 * step, 1.0);
            } else {
                step *= 0.9;
            }
        }
        result = std::min(result, current);
    }
    return result;
}

/// Thrown by delta_psi_chain_check when its hypotheses do not hold for the input.
class ChainPreconditionError : public InvalidInput
{
public:
    enum class Reason { cone, incoherence };
    ChainPreconditionError(Reason reason, const std::string& what)
        : InvalidInput(what)
        , reason_(reason)
    {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

/**
 * ||Delta||_{2,inf} <= (1 + 16/(7(alpha-1))) ||Psi Delta||_{2,inf} for a cone Delta
 * on a design satisfying mutual incoherence at (alpha, |support|).
 */
inline bool delta_psi_chain_check(const Eigen::Ref<const Matrix>& delta, const Eigen::Ref<const Matrix>& x,
                                  double alpha, const Support& support)
{
    detail::require(alpha > 1.0, "delta_psi_chain_check: alpha must be greater than 1");
    detail::require(!support.empty(), "delta_psi_chain_check: support must be nonempty");
    if (cone_ratio(delta, support) > 3.0) {
        throw ChainPreconditionError(ChainPreconditionError::Reason::cone,
                                     "delta_psi_chain_check: Delta is outside the cone (ratio > 3)");
    }
    const double available = incoherence_alpha(x, static_cast<Index>(support.size()));
    if (available < alpha * (1.0 - 1e-9)) {
        throw ChainPreconditionError(ChainPreconditionError::Reason::incoherence,
                                     "delta_psi_chain_check: design is not incoherent at the requested alpha");
    }
    const Matrix psi_delta = gram(x) * delta;
    return delta.rowwise().norm().maxCoeff() <=
           incoherence_constant(alpha) * psi_delta.rowwise().norm().maxCoeff();
}

/// Smallest eta with lambda ||B*||_{2,1} <= eta sigma*.
inline double eta(double lambda, const Eigen::Ref<const Matrix>& coef_star, double sigma_star)
{
    detail::require(sigma_star > 0.0, "eta: sigma_star must be positive");
    return lambda * coef_star.rowwise().norm().sum() / sigma_star;
}

struct SupnormCheck
{
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// (1/q)||B_hat - B*||_{2,inf} against C(alpha) (3 + eta) lambda sigma*.
inline SupnormCheck supnorm_bound_check(const FitResult& fit, const Dataset& data, double lambda, double alpha)
{
    detail::require(data.truth.has_value(), "supnorm_bound_check: ground truth required");
    detail::require(alpha > 1.0, "supnorm_bound_check: alpha must be greater than 1");
    const auto& truth = *data.truth;
    const double q = static_cast<double>(data.q());
    SupnormCheck out;
    out.lhs = (fit.coef - truth.coef).rowwise().norm().maxCoeff() / q;
    out.rhs = incoherence_constant(alpha) * (3.0 + eta(lambda, truth.coef, truth.sigma)) * lambda * truth.sigma;
    out.holds = out.lhs <= out.rhs;
    return out;
}

/// {j : (1/q) ||B_j||_2 > threshold}
inline Support estimate_support(const Eigen::Ref<const Matrix>& coef, double threshold)
{
    detail::require(threshold >= 0.0, "estimate_support: threshold must be nonnegative");
    const double q = static_cast<double>(coef.cols());
    Support out;
    for (Index j = 0; j < coef.rows(); ++j) {
        if (coef.row(j).norm() / q > threshold) out.push_back(j);
    }
    return out;
}

struct Recovery
{
    bool hard = false;
    Index true_positives = 0;
    Index false_positives = 0;
};

inline Recovery recovery(const Support& estimated, const Support& truth)
{
    Recovery r;
    for (Index j : estimated) {
        if (std::binary_search(truth.begin(), truth.end(), j)) ++r.true_positives;
        else ++r.false_positives;
    }
    r.hard = estimated == truth;
    return r;
}

/// Singular values of the fitted residuals, nonincreasing.
inline Vector residual_spectrum(const FitResult& fit)
{
    detail::require(fit.residuals.size() > 0, "residual_spectrum: fit carries no residuals");
    return singular_values(fit.residuals);
}

/**
 * ||X^T Z_hat||_{2,inf} for the datafit gradient Z_hat at the fitted residuals;
 * optimality requires it to be at most lambda.
 */
inline double dantzig_lhs(const FitResult& fit, const Eigen::Ref<const Matrix>& x, double sigma_min = 0.0)
{
    const double n = static_cast<double>(fit.residuals.rows());
    const double nq = n * static_cast<double>(fit.residuals.cols());
    switch (fit.kind) {
        case EstimatorKind::lasso:
            return (x.transpose() * fit.residuals).cwiseAbs().maxCoeff() / n;
        case EstimatorKind::mt_lasso:
            return (x.transpose() * fit.residuals).rowwise().norm().maxCoeff() / nq;
        case EstimatorKind::scl: {
            const double sigma = std::max(fit.residuals.norm() / std::sqrt(nq), sigma_min);
            return (x.transpose() * fit.residuals).rowwise().norm().maxCoeff() / (nq * sigma);
        }
        case EstimatorKind::sgcl: {
            detail::require(fit.noise_root.has_value(), "dantzig_lhs: sgcl fit without noise root");
            const Matrix w_r = fit.noise_root->llt().solve(fit.residuals);
            return (x.transpose() * w_r).rowwise().norm().maxCoeff() / nq;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Concentration events

enum class EventId { C1, C1p, C2, C3, C4, C5, C6, A1, A2 };

inline constexpr std::array<EventId, 9> all_events{EventId::C1, EventId::C1p, EventId::C2, EventId::C3, EventId::C4,
                                                   EventId::C5, EventId::C6,  EventId::A1, EventId::A2};

inline std::string to_string(EventId id)
{
    switch (id) {
        case EventId::C1: return "C1";
        case EventId::C1p: return "C1'";
        case EventId::C2: return "C2";
        case EventId::C3: return "C3";
        case EventId::C4: return "C4";
        case EventId::C5: return "C5";
        case EventId::C6: return "C6";
        case EventId::A1: return "A1";
        case EventId::A2: return "A2";
    }
    return "?";
}

inline EventId event_from_string(const std::string& s)
{
    for (EventId id : all_events)
        if (to_string(id) == s) return id;
    if (s == "C1p") return EventId::C1p;
    throw InvalidInput("unknown event id '" + s + "'");
}

/// Regularization level each event is stated for.
inline double event_lambda(EventId id, Index n, Index q, Index p, double a, double sigma_star)
{
    const double nd = static_cast<double>(n), qd = static_cast<double>(q);
    const double logp = std::log(static_cast<double>(p));
    switch (id) {
        case EventId::C1: return a * sigma_star * std::sqrt(logp / nd);
        case EventId::C1p: return a * std::sqrt(2.0 * logp / nd);
        case EventId::C2: return 2.0 * sigma_star / std::sqrt(nd * qd) * (1.0 + a * std::sqrt(logp / qd));
        case EventId::C3:
        case EventId::A1:
        case EventId::A2: return 2.0 * std::sqrt(2.0) / std::sqrt(nd * qd) * (1.0 + a * std::sqrt(logp / qd));
        case EventId::C4:
        case EventId::C5:
        case EventId::C6: return 0.0;
    }
    return 0.0;
}

/// Noise statistics shared by all events, computed once per draw.
struct NoiseStatistics
{
    Index n = 0, q = 0;
    double xte_first_inf = 0.0;  // ||X^T E_{:0}||_inf
    double xte_l2inf = 0.0;      // ||X^T E||_{2,inf}
    double frob = 0.0;           // ||E||_F
    double gamma_min = 0.0;      // smallest of the n singular values of E / sqrt(q) (0 if q < n)
    double gamma_max = 0.0;
};

inline NoiseStatistics noise_statistics(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& e)
{
    detail::require(x.rows() == e.rows(), "event: X and E must have the same number of rows");
    NoiseStatistics st;
    st.n = e.rows();
    st.q = e.cols();
    const Matrix xte = x.transpose() * e;
    st.xte_first_inf = xte.col(0).cwiseAbs().maxCoeff();
    st.xte_l2inf = xte.rowwise().norm().maxCoeff();
    st.frob = e.norm();
    const Vector gamma = singular_values(e / std::sqrt(static_cast<double>(e.cols())));
    st.gamma_max = gamma(0);
    st.gamma_min = gamma.size() < st.n ? 0.0 : gamma(gamma.size() - 1);
    return st;
}

inline bool event_holds(EventId id, const NoiseStatistics& st, double lambda, double sigma_star)
{
    detail::require(sigma_star > 0.0, "event_holds: sigma_star must be positive");
    const double n = static_cast<double>(st.n), nq = n * static_cast<double>(st.q);
    const double sqrt2 = std::numbers::sqrt2;
    const double scaled_frob = st.frob / std::sqrt(nq);
    switch (id) {
        case EventId::C1: return st.xte_first_inf / n <= lambda / 2.0;
        case EventId::C1p: return st.xte_first_inf / n <= lambda / 2.0 * sigma_star / sqrt2;
        case EventId::C2: return st.xte_l2inf / nq <= lambda / 2.0;
        case EventId::C3: return st.xte_l2inf / nq <= lambda * sigma_star / (2.0 * sqrt2);
        case EventId::C4: return sigma_star / sqrt2 < scaled_frob && scaled_frob < 2.0 * sigma_star;
        case EventId::C5: return st.gamma_min > sigma_star / sqrt2;
        case EventId::C6: return 2.0 * sigma_star > st.gamma_max;
        case EventId::A1:
            return st.frob > 0.0 && st.xte_l2inf / (std::sqrt(nq) * st.frob) <= lambda / 2.0 &&
                   event_holds(EventId::C4, st, lambda, sigma_star);
        case EventId::A2:
            return event_holds(EventId::C3, st, lambda, sigma_star) &&
                   event_holds(EventId::C5, st, lambda, sigma_star) &&
                   event_holds(EventId::C6, st, lambda, sigma_star);
    }
    return false;
}

/// Whether the concentration event `id` holds for the noise draw E.
inline bool event_holds(EventId id, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& e,
                        double lambda, double sigma_star)
{
    require_finite(x, "event X");
    require_finite(e, "event E");
    return event_holds(id, noise_statistics(x, e), lambda, sigma_star);
}

/// Constant of the matrix Gaussian concentration bounds for C5, C6, A2.
inline constexpr double matrix_concentration_c = 1.0 / 32.0;

/// Smallest A for which the event's probability bound is stated (0 when A is unused).
inline double event_min_a(EventId id)
{
    switch (id) {
        case EventId::C1:
        case EventId::C1p: return 2.0 * std::numbers::sqrt2;
        case EventId::C2:
        case EventId::C3:
        case EventId::A1:
        case EventId::A2: return std::numbers::sqrt2;
        default: return 0.0;
    }
}

/**
 * Closed-form lower bound on P(event), clamped to [0, 1].
 * Throws InvalidInput when A is at or below the event's admissible threshold.
 */
inline double event_probability_bound(EventId id, Index n, Index q, Index p, double a)
{
    detail::require(n >= 1 && q >= 1 && p >= 1, "event_probability_bound: n, q, p must be positive");
    const double threshold = event_min_a(id);
    if (threshold > 0.0 && !(a > threshold)) {
        throw InvalidInput("event_probability_bound: event " + to_string(id) + " requires A > " +
                           format_double(threshold));
    }
    const double nd = static_cast<double>(n), qd = static_cast<double>(q), pd = static_cast<double>(p);
    const double c = matrix_concentration_c;
    const double chi_term = (1.0 + std::exp(2.0)) * std::exp(-nd * qd / 24.0);
    double bound = 0.0;
    switch (id) {
        case EventId::C1:
        case EventId::C1p: bound = 1.0 - 2.0 * std::pow(pd, 1.0 - a * a / 8.0); break;
        case EventId::C2:
        case EventId::C3: bound = 1.0 - std::pow(pd, 1.0 - a * a / 2.0); break;
        case EventId::C4: bound = 1.0 - chi_term; break;
        case EventId::C5: bound = 1.0 - nd * std::exp(-c * qd / (2.0 * nd)); break;
        case EventId::C6: bound = 1.0 - nd * std::exp(-c * qd / nd); break;
        case EventId::A1: bound = 1.0 - std::pow(pd, 1.0 - a * a / 2.0) - chi_term; break;
        case EventId::A2: bound = 1.0 - std::pow(pd, 1.0 - a * a / 2.0) - 2.0 * nd * std::exp(-c * qd / (2.0 * nd)); break;
    }
    return std::clamp(bound, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Report

struct DiagnosticsReport
{
    double dantzig_margin = 0.0;  // ||X^T Z_hat||_{2,inf} - lambda, <= 0 at optimality
    double incoherence_alpha = 0.0;
    double rep_ratio = 0.0;
    double cone_ratio = 0.0;
    double eta = 0.0;
    double supnorm_lhs = 0.0;
    double supnorm_rhs = 0.0;
    std::map<std::string, bool> events;
    Support support_hat;
    Recovery recovery;
};

struct DiagnoseOptions
{
    double alpha = 2.0;            // incoherence level used in the sup-norm constant
    Index s = 0;                   // 0: use |support_star|
    std::size_t rep_trials = 2000;
    std::uint64_t seed = 0;
    double sigma_min = 0.0;        // scl smoothing level used by the fit
};

/// Every certificate computable from one fit on a dataset with ground truth.
inline DiagnosticsReport diagnose(const FitResult& fit, const Dataset& data, double lambda,
                                  const DiagnoseOptions& opts = {})
{
    detail::require(data.truth.has_value(), "diagnose: dataset has no ground truth");
    const auto& truth = *data.truth;
    DiagnosticsReport rep;
    rep.dantzig_margin = dantzig_lhs(fit, data.x, opts.sigma_min) - lambda;
    const Index s = opts.s > 0 ? opts.s : std::max<Index>(1, static_cast<Index>(truth.support.size()));
    rep.incoherence_alpha = incoherence_alpha(data.x, s);
    rep.rep_ratio = truth.support.empty() ? 0.0 : pivotal::rep_ratio(data.x, truth.support, opts.rep_trials, opts.seed, data.q());
    const Matrix delta = fit.coef - truth.coef;
    rep.cone_ratio = pivotal::cone_ratio(delta, truth.support);
    rep.eta = pivotal::eta(lambda, truth.coef, truth.sigma);
    const SupnormCheck sup = supnorm_bound_check(fit, data, lambda, opts.alpha);
    rep.supnorm_lhs = sup.lhs;
    rep.supnorm_rhs = sup.rhs;

    const Matrix noise = data.y - data.x * truth.coef;
    const NoiseStatistics st = noise_statistics(data.x, noise);
    for (EventId id : all_events) rep.events[to_string(id)] = event_holds(id, st, lambda, truth.sigma);

    rep.support_hat = estimate_support(fit.coef, 0.0);
    rep.recovery = recovery(rep.support_hat, truth.support);
    return rep;
}

} // namespace pivotal
