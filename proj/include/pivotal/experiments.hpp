#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <pivotal/core/dataset.hpp>
#include <pivotal/core/parallel.hpp>
#include <pivotal/core/serialize.hpp>
#include <pivotal/diagnostics.hpp>
#include <pivotal/estimators.hpp>
#include <pivotal/simulate.hpp>

namespace pivotal {

enum class ExperimentKind { pivotality, residual_rank, recovery_heatmap, bound_verification };

inline std::string to_string(ExperimentKind k)
{
    switch (k) {
        case ExperimentKind::pivotality: return "pivotality";
        case ExperimentKind::residual_rank: return "residual_rank";
        case ExperimentKind::recovery_heatmap: return "recovery_heatmap";
        case ExperimentKind::bound_verification: return "bound_verification";
    }
    return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s)
{
    for (auto k : {ExperimentKind::pivotality, ExperimentKind::residual_rank, ExperimentKind::recovery_heatmap,
                   ExperimentKind::bound_verification})
        if (to_string(k) == s) return k;
    throw InvalidInput("unknown experiment '" + s + "'");
}

/// `count` ratios from 1 down to `min_ratio`, geometrically spaced.
struct GeometricGrid
{
    std::size_t count = 30;
    double min_ratio = 1e-3;

    void validate(const std::string& name) const
    {
        detail::require(count >= 1, name + ".count must be at least 1");
        detail::require(min_ratio > 0.0 && min_ratio <= 1.0, name + ".min_ratio must lie in (0, 1]");
    }

    std::vector<double> ratios() const
    {
        std::vector<double> out(count);
        if (count == 1) {
            out[0] = 1.0;
            return out;
        }
        const double step = std::log(min_ratio) / static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(step * static_cast<double>(i));
        out.back() = min_ratio;
        return out;
    }

    bool operator==(const GeometricGrid&) const = default;
};

/**
 * Estimator templates contribute their kind and solver controls; the smoothing
 * levels are set by each pipeline:
 *   pivotality, residual_rank: unsmoothed proxies computed from Y;
 *   recovery_heatmap: sigma_min = r sigma* for r in sigma_min_grid;
 *   bound_verification: sigma_min = sigma_min_grid[0] sigma*.
 * sgcl uses the template's sigma_max when finite, else the proxy from Y.
 */
struct ExperimentConfig
{
    ExperimentKind experiment = ExperimentKind::pivotality;
    SimulationSpec sim{};
    std::vector<EstimatorSpec> estimators{};
    GeometricGrid lambda_grid{};
    std::vector<double> sigma_min_grid{};  // sigma_min / sigma*
    std::vector<double> noise_levels{};    // sigma* values, pivotality only
    std::size_t replicates = 10;
    std::size_t folds = 5;
    double a = 2.0;                        // bound_verification
    std::string output_path = "results";

    void validate() const
    {
        sim.validate();
        detail::require(!estimators.empty(), "estimators must not be empty");
        for (const auto& e : estimators) e.controls.validate();
        lambda_grid.validate("lambda_grid");
        detail::require(replicates >= 1, "replicates must be at least 1");
        for (double r : sigma_min_grid) detail::require(std::isfinite(r) && r > 0.0, "sigma_min_grid entries must be positive");
        for (double s : noise_levels) detail::require(std::isfinite(s) && s > 0.0, "noise_levels entries must be positive");
        auto kinds_in = [&](std::initializer_list<EstimatorKind> allowed, const std::string& what) {
            for (const auto& e : estimators) {
                detail::require(std::find(allowed.begin(), allowed.end(), e.kind) != allowed.end(),
                                "estimators: " + to_string(e.kind) + " is not supported by " + what);
            }
        };
        switch (experiment) {
            case ExperimentKind::pivotality:
                detail::require(sim.q == 1, "sim.q must be 1 for pivotality");
                detail::require(!noise_levels.empty(), "noise_levels must not be empty");
                detail::require(folds >= 2, "folds must be at least 2");
                detail::require(static_cast<Index>(folds) <= sim.n, "folds must not exceed sim.n");
                kinds_in({EstimatorKind::lasso, EstimatorKind::scl}, "pivotality");
                break;
            case ExperimentKind::residual_rank:
                kinds_in({EstimatorKind::sgcl, EstimatorKind::scl}, "residual_rank");
                break;
            case ExperimentKind::recovery_heatmap:
                detail::require(!sigma_min_grid.empty(), "sigma_min_grid must not be empty");
                kinds_in({EstimatorKind::scl, EstimatorKind::sgcl, EstimatorKind::mt_lasso}, "recovery_heatmap");
                break;
            case ExperimentKind::bound_verification:
                detail::require(sim.design == DesignKind::incoherent, "sim.design must be incoherent");
                detail::require(sim.noise == NoiseModel::sigma, "sim.noise must be 'sigma'");
                detail::require(!sigma_min_grid.empty(), "sigma_min_grid must not be empty");
                kinds_in({EstimatorKind::scl, EstimatorKind::sgcl}, "bound_verification");
                break;
        }
    }
};

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::int64_t, double, std::string>;

struct ExperimentTable
{
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& c) const
    {
        const auto it = std::find(columns.begin(), columns.end(), c);
        if (it == columns.end()) throw InvalidInput("table " + name + " has no column '" + c + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    double number(std::size_t row, const std::string& c) const
    {
        const Cell& cell = rows.at(row).at(column(c));
        if (const auto* d = std::get_if<double>(&cell)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
        throw InvalidInput("table " + name + ": column '" + c + "' is not numeric");
    }

    std::string text(std::size_t row, const std::string& c) const
    {
        const Cell& cell = rows.at(row).at(column(c));
        if (const auto* s = std::get_if<std::string>(&cell)) return *s;
        throw InvalidInput("table " + name + ": column '" + c + "' is not text");
    }

    std::string to_csv() const
    {
        std::string out;
        for (std::size_t j = 0; j < columns.size(); ++j) out += (j ? "," : "") + columns[j];
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (j) out += ',';
                std::visit(
                    [&out](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, std::string>) out += v;
                        else if constexpr (std::is_same_v<T, double>) out += format_double(v);
                        else out += std::to_string(v);
                    },
                    row[j]);
            }
            out += '\n';
        }
        return out;
    }
};

inline Cell flag(bool b) { return std::int64_t{b ? 1 : 0}; }
inline Cell count_cell(std::size_t v) { return static_cast<std::int64_t>(v); }

// ---------------------------------------------------------------------------
// Cross-validation

struct CrossValidation
{
    double lambda = 0.0;
    std::size_t index = 0;           // position in the descending grid
    std::vector<double> grid;        // descending
    std::vector<double> mean_error;  // mean held-out ||Y_test - X_test B||_F^2 per grid point
    bool converged = true;           // every fit converged
};

/**
 * K-fold cross-validation over contiguous row blocks; fold k holds rows
 * [k n / K, (k + 1) n / K). Each fold fits the grid from the largest lambda
 * down with warm starts. Returns the grid value with the smallest mean
 * held-out squared error, preferring the larger lambda on ties.
 *
 * With `freeze_at_floor`, once a scl fit has sigma at sigma_min the path stops
 * refitting and the remaining (smaller) lambdas reuse that fit: for the
 * unsmoothed square-root Lasso the solution no longer depends on lambda once it
 * interpolates the training data.
 */
inline CrossValidation cross_validate_lambda(const Dataset& data, const EstimatorSpec& estimator,
                                             std::vector<double> lambda_grid, std::size_t folds,
                                             bool freeze_at_floor = false)
{
    detail::require(folds >= 2, "folds must be at least 2");
    detail::require(static_cast<Index>(folds) <= data.n(), "folds must not exceed the number of rows");
    detail::require(!lambda_grid.empty(), "lambda grid must not be empty");
    for (double l : lambda_grid) detail::require(std::isfinite(l) && l > 0.0, "lambda grid entries must be positive");
    std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());

    const Index n = data.n();
    CrossValidation cv;
    cv.grid = lambda_grid;
    cv.mean_error.assign(lambda_grid.size(), 0.0);
    for (std::size_t k = 0; k < folds; ++k) {
        const Index lo = static_cast<Index>(k) * n / static_cast<Index>(folds);
        const Index hi = static_cast<Index>(k + 1) * n / static_cast<Index>(folds);
        detail::require(hi > lo, "cross-validation: degenerate fold with zero rows");
        const Index n_train = n - (hi - lo);
        Matrix x_train(n_train, data.p()), y_train(n_train, data.q());
        x_train << data.x.topRows(lo), data.x.bottomRows(n - hi);
        y_train << data.y.topRows(lo), data.y.bottomRows(n - hi);
        const auto x_test = data.x.middleRows(lo, hi - lo);
        const auto y_test = data.y.middleRows(lo, hi - lo);

        std::optional<Matrix> warm;
        bool frozen = false;
        for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
            if (!frozen) {
                EstimatorSpec spec = estimator;
                spec.lambda = lambda_grid[i];
                const FitResult f = fit(x_train, y_train, spec, warm);
                cv.converged = cv.converged && f.converged;
                warm = f.coef;
                frozen = freeze_at_floor && f.sigma && *f.sigma <= spec.sigma_min;
            }
            cv.mean_error[i] += (y_test - x_test * *warm).squaredNorm() / static_cast<double>(folds);
        }
    }
    cv.index = 0;
    for (std::size_t i = 1; i < cv.mean_error.size(); ++i)
        if (cv.mean_error[i] < cv.mean_error[cv.index]) cv.index = i;
    cv.lambda = lambda_grid[cv.index];
    return cv;
}

namespace detail {

inline std::vector<double> scaled(const std::vector<double>& ratios, double top)
{
    std::vector<double> out(ratios.size());
    for (std::size_t i = 0; i < ratios.size(); ++i) out[i] = top * ratios[i];
    return out;
}

inline double sgcl_sigma_max(const EstimatorSpec& e, const Matrix& y)
{
    return std::isfinite(e.sigma_max) ? e.sigma_max : unsmoothed_sigma_max(y);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Pipelines

/// Cross-validated lambda against the noise level for the Lasso and the (unsmoothed) square-root Lasso.
inline ExperimentTable run_pivotality(const ExperimentConfig& cfg, std::size_t jobs = 1)
{
    cfg.validate();
    detail::require(cfg.experiment == ExperimentKind::pivotality, "run_pivotality: wrong experiment kind");
    const std::size_t levels = cfg.noise_levels.size();
    const std::size_t ne = cfg.estimators.size();
    std::vector<std::vector<Cell>> rows(levels * cfg.replicates * ne);
    const auto ratios = cfg.lambda_grid.ratios();

    parallel_for(levels * cfg.replicates, jobs, [&](std::size_t item) {
        const std::size_t li = item / cfg.replicates, r = item % cfg.replicates;
        SimulationSpec sim = cfg.sim;
        sim.noise = NoiseModel::sigma;
        sim.sigma = cfg.noise_levels[li];
        const Dataset data = simulate(sim, r);
        for (std::size_t e = 0; e < ne; ++e) {
            EstimatorSpec spec = cfg.estimators[e];
            if (spec.kind == EstimatorKind::scl) spec.sigma_min = unsmoothed_sigma_min(data.y);
            const double lmax = lambda_max(spec.kind, data.x, data.y, spec.sigma_min);
            const CrossValidation cv =
                cross_validate_lambda(data, spec, detail::scaled(ratios, lmax), cfg.folds, spec.kind == EstimatorKind::scl);
            rows[item * ne + e] = {sim.sigma,         to_string(spec.kind), count_cell(r), cv.lambda, lmax,
                                   cv.lambda / lmax,  cv.mean_error[cv.index], flag(cv.converged)};
        }
    });
    return ExperimentTable{"pivotality",
                           {"sigma_star", "estimator", "replicate", "lambda_opt", "lambda_max", "lambda_ratio",
                            "cv_error", "converged"},
                           std::move(rows)};
}

/// Residual singular values along a lambda path, next to those of Y.
inline ExperimentTable run_residual_rank(const ExperimentConfig& cfg, std::size_t jobs = 1)
{
    cfg.validate();
    detail::require(cfg.experiment == ExperimentKind::residual_rank, "run_residual_rank: wrong experiment kind");
    const auto ratios = cfg.lambda_grid.ratios();
    const std::size_t ne = cfg.estimators.size();
    const auto nsv = static_cast<std::size_t>(cfg.sim.n);
    std::vector<std::vector<Cell>> rows(cfg.replicates * ne * ratios.size() * nsv);

    parallel_for(cfg.replicates * ne, jobs, [&](std::size_t item) {
        const std::size_t r = item / ne, e = item % ne;
        const Dataset data = simulate(cfg.sim, r);
        EstimatorSpec spec = cfg.estimators[e];
        spec.sigma_min = unsmoothed_sigma_min(data.y);
        if (spec.kind == EstimatorKind::sgcl) spec.sigma_max = detail::sgcl_sigma_max(spec, data.y);
        const double lmax = lambda_max(spec.kind, data.x, data.y, spec.sigma_min, spec.sigma_max);
        const Vector y_sv = singular_values(data.y);
        const double floor = spec.sigma_min * std::sqrt(static_cast<double>(data.q()));
        std::optional<Matrix> warm;
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            spec.lambda = lmax * ratios[i];
            const FitResult f = fit(data.x, data.y, spec, warm);
            warm = f.coef;
            const Vector sv = residual_spectrum(f);
            for (std::size_t k = 0; k < nsv; ++k) {
                const auto ki = static_cast<Index>(k);
                const double v = ki < sv.size() ? sv(ki) : 0.0;
                const double yv = ki < y_sv.size() ? y_sv(ki) : 0.0;
                rows[((item * ratios.size()) + i) * nsv + k] = {
                    to_string(spec.kind), count_cell(r), ratios[i], spec.lambda, count_cell(k),
                    v,                    yv,            flag(v < floor), flag(f.converged)};
            }
        }
    });
    return ExperimentTable{"residual_rank",
                           {"estimator", "replicate", "lambda_ratio", "lambda", "index", "singular_value",
                            "y_singular_value", "at_floor", "converged"},
                           std::move(rows)};
}

/**
 * Hard recovery over a (lambda / lambda_0, sigma_min / sigma*) grid, where
 * lambda_0 = ||X^T Y||_{2,inf} / (sqrt(nq) ||Y||_F) is the square-root Lasso
 * lambda_max without the sigma_min clip. mt_lasso rows are fitted at
 * lambda * sigma_min, the saturated counterpart of each cell.
 */
inline ExperimentTable run_recovery_heatmap(const ExperimentConfig& cfg, std::size_t jobs = 1)
{
    cfg.validate();
    detail::require(cfg.experiment == ExperimentKind::recovery_heatmap, "run_recovery_heatmap: wrong experiment kind");
    const auto ratios = cfg.lambda_grid.ratios();
    const std::size_t ns = cfg.sigma_min_grid.size(), ne = cfg.estimators.size(), nl = ratios.size();
    std::vector<std::vector<Cell>> rows(cfg.replicates * ns * ne * nl);
    const double c_alpha = cfg.sim.alpha > 1.0 ? incoherence_constant(cfg.sim.alpha) : incoherence_constant(2.0);

    parallel_for(cfg.replicates * ns * ne, jobs, [&](std::size_t item) {
        const std::size_t r = item / (ns * ne), k = (item / ne) % ns, e = item % ne;
        const Dataset data = simulate(cfg.sim, r);
        const auto& truth = *data.truth;
        const double nq = static_cast<double>(data.n() * data.q());
        const double lambda0 =
            (data.x.transpose() * data.y).rowwise().norm().maxCoeff() / (std::sqrt(nq) * data.y.norm());
        const double sigma_min = cfg.sigma_min_grid[k] * truth.sigma;
        EstimatorSpec spec = cfg.estimators[e];
        spec.sigma_min = sigma_min;
        if (spec.kind == EstimatorKind::sgcl) spec.sigma_max = std::max(sigma_min, detail::sgcl_sigma_max(spec, data.y));

        std::optional<Matrix> warm;
        for (std::size_t i = 0; i < nl; ++i) {
            const double lambda = lambda0 * ratios[i];
            spec.lambda = spec.kind == EstimatorKind::mt_lasso ? lambda * sigma_min : lambda;
            const FitResult f = fit(data.x, data.y, spec, warm);
            warm = f.coef;
            const Support hat = estimate_support(f.coef, 0.0);
            const double threshold = c_alpha * (3.0 + eta(lambda, truth.coef, truth.sigma)) * lambda * truth.sigma;
            const bool saturated = f.sigma ? *f.sigma <= sigma_min : spec.kind == EstimatorKind::mt_lasso;
            rows[item * nl + i] = {to_string(spec.kind),
                                   count_cell(r),
                                   cfg.sigma_min_grid[k],
                                   sigma_min,
                                   ratios[i],
                                   lambda,
                                   flag(hat == truth.support),
                                   count_cell(hat.size()),
                                   flag(estimate_support(f.coef, threshold) == truth.support),
                                   flag(saturated),
                                   flag(f.converged)};
        }
    });
    return ExperimentTable{"recovery_heatmap",
                           {"estimator", "replicate", "sigma_min_ratio", "sigma_min", "lambda_ratio", "lambda",
                            "hard_recovery", "support_size", "hard_recovery_threshold", "saturated", "converged"},
                           std::move(rows)};
}

/// Per-cell means of a recovery_heatmap table, in first-appearance order of the cells.
inline ExperimentTable heatmap_cell_means(const ExperimentTable& t)
{
    using Key = std::tuple<std::string, double, double>;
    std::vector<Key> order;
    std::map<Key, std::array<double, 5>> acc;  // recovery, size, threshold recovery, converged, count
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const Key key{t.text(i, "estimator"), t.number(i, "sigma_min_ratio"), t.number(i, "lambda_ratio")};
        auto [it, inserted] = acc.try_emplace(key, std::array<double, 5>{});
        if (inserted) order.push_back(key);
        it->second[0] += t.number(i, "hard_recovery");
        it->second[1] += t.number(i, "support_size");
        it->second[2] += t.number(i, "hard_recovery_threshold");
        it->second[3] += t.number(i, "converged");
        it->second[4] += 1.0;
    }
    ExperimentTable out{t.name + "_cells",
                        {"estimator", "sigma_min_ratio", "lambda_ratio", "hard_recovery", "support_size",
                         "hard_recovery_threshold", "converged_fraction", "replicates"},
                        {}};
    for (const auto& key : order) {
        const auto& a = acc[key];
        out.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), a[0] / a[4], a[1] / a[4],
                            a[2] / a[4], a[3] / a[4], static_cast<std::int64_t>(a[4])});
    }
    return out;
}

/**
 * Fits at the noise-free lambda on an incoherent design and records, per draw,
 * the events, the cone ratio, the sup-norm bound and thresholded support recovery.
 */
inline ExperimentTable run_bound_verification(const ExperimentConfig& cfg, std::size_t jobs = 1)
{
    cfg.validate();
    detail::require(cfg.experiment == ExperimentKind::bound_verification,
                    "run_bound_verification: wrong experiment kind");
    const auto& sim = cfg.sim;
    const double lambda = proposed_lambda(sim.n, sim.q, sim.p, cfg.a);
    const double bound_a1 = event_probability_bound(EventId::A1, sim.n, sim.q, sim.p, cfg.a);
    const double bound_a2 = event_probability_bound(EventId::A2, sim.n, sim.q, sim.p, cfg.a);
    const double q = static_cast<double>(sim.q);
    const std::size_t ne = cfg.estimators.size();
    std::vector<std::vector<Cell>> rows(cfg.replicates * ne);

    parallel_for(cfg.replicates * ne, jobs, [&](std::size_t item) {
        const std::size_t r = item / ne, e = item % ne;
        const Dataset data = simulate(sim, r);
        const auto& truth = *data.truth;
        EstimatorSpec spec = cfg.estimators[e];
        spec.lambda = lambda;
        spec.sigma_min = cfg.sigma_min_grid.front() * truth.sigma;
        if (spec.kind == EstimatorKind::sgcl) spec.sigma_max = std::max(spec.sigma_min, detail::sgcl_sigma_max(spec, data.y));
        const FitResult f = fit(data.x, data.y, spec);

        const NoiseStatistics st = noise_statistics(data.x, data.y - data.x * truth.coef);
        const double cone = cone_ratio(f.coef - truth.coef, truth.support);
        const SupnormCheck sup = supnorm_bound_check(f, data, lambda, sim.alpha);
        double weakest = infinity;
        for (Index j : truth.support) weakest = std::min(weakest, truth.coef.row(j).norm() / q);
        const bool strong = weakest > 2.0 * sup.rhs;
        rows[item] = {to_string(spec.kind),
                      count_cell(r),
                      lambda,
                      truth.sigma,
                      flag(event_holds(EventId::A1, st, lambda, truth.sigma)),
                      flag(event_holds(EventId::A2, st, lambda, truth.sigma)),
                      flag(event_holds(EventId::C3, st, lambda, truth.sigma)),
                      flag(event_holds(EventId::C4, st, lambda, truth.sigma)),
                      cone,
                      flag(cone <= 3.0),
                      sup.lhs,
                      sup.rhs,
                      flag(sup.holds),
                      eta(lambda, truth.coef, truth.sigma),
                      flag(strong),
                      flag(estimate_support(f.coef, sup.rhs) == truth.support),
                      bound_a1,
                      bound_a2,
                      flag(f.converged)};
    });
    return ExperimentTable{"bound_verification",
                           {"estimator", "replicate", "lambda", "sigma_star", "event_A1", "event_A2", "event_C3",
                            "event_C4", "cone_ratio", "cone_ok", "supnorm_lhs", "supnorm_rhs", "supnorm_holds", "eta",
                            "signal_condition", "support_recovered", "bound_A1", "bound_A2", "converged"},
                           std::move(rows)};
}

inline ExperimentTable run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1)
{
    switch (cfg.experiment) {
        case ExperimentKind::pivotality: return run_pivotality(cfg, jobs);
        case ExperimentKind::residual_rank: return run_residual_rank(cfg, jobs);
        case ExperimentKind::recovery_heatmap: return run_recovery_heatmap(cfg, jobs);
        case ExperimentKind::bound_verification: return run_bound_verification(cfg, jobs);
    }
    throw InvalidInput("unknown experiment");
}

// ---------------------------------------------------------------------------
// Summaries used by the reports

/// Spearman rank correlation (average ranks on ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    detail::require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length samples");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i] / n;
        mb += rb[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

struct PivotalitySummary
{
    std::vector<double> noise_levels;
    std::vector<double> mean_lambda;  // per noise level
    double max_min_ratio = 0.0;
    double spearman_levels = 0.0;     // over the per-level means
    double spearman_rows = 0.0;       // over every (sigma*, lambda_opt) pair
};

/// Per-noise-level mean of lambda_opt for one estimator of a pivotality table.
inline PivotalitySummary summarize_pivotality(const ExperimentTable& t, EstimatorKind kind)
{
    PivotalitySummary s;
    std::map<double, std::pair<double, double>> acc;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.text(i, "estimator") != to_string(kind)) continue;
        const double sigma = t.number(i, "sigma_star"), l = t.number(i, "lambda_opt");
        acc[sigma].first += l;
        acc[sigma].second += 1.0;
        xs.push_back(sigma);
        ys.push_back(l);
    }
    detail::require(acc.size() >= 2, "summarize_pivotality: need at least two noise levels");
    for (const auto& [sigma, v] : acc) {
        s.noise_levels.push_back(sigma);
        s.mean_lambda.push_back(v.first / v.second);
    }
    const auto [lo, hi] = std::minmax_element(s.mean_lambda.begin(), s.mean_lambda.end());
    s.max_min_ratio = *hi / *lo;
    s.spearman_levels = spearman(s.noise_levels, s.mean_lambda);
    s.spearman_rows = spearman(xs, ys);
    return s;
}

} // namespace pivotal
