#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <pivotal/core/dataset.hpp>
#include <pivotal/core/matrix.hpp>
#include <pivotal/diagnostics.hpp>
#include <pivotal/random.hpp>

namespace pivotal {

enum class DesignKind {
    toeplitz,    // Gaussian rows with covariance rho^|i-j|
    incoherent,  // Gram matrix exactly (1 - m) I + m 11^T with m = 1 / (7 alpha s)
};

enum class NoiseModel {
    snr,    // sigma* chosen so that ||X B*||_F / ||E||_F = snr exactly
    sigma,  // E = sigma* G with sigma* given
};

inline std::string to_string(DesignKind d) { return d == DesignKind::toeplitz ? "toeplitz" : "incoherent"; }
inline std::string to_string(NoiseModel m) { return m == NoiseModel::snr ? "snr" : "sigma"; }

inline DesignKind design_kind_from_string(const std::string& s)
{
    if (s == "toeplitz") return DesignKind::toeplitz;
    if (s == "incoherent") return DesignKind::incoherent;
    throw InvalidInput("unknown design '" + s + "'");
}

inline NoiseModel noise_model_from_string(const std::string& s)
{
    if (s == "snr") return NoiseModel::snr;
    if (s == "sigma") return NoiseModel::sigma;
    throw InvalidInput("unknown noise model '" + s + "'");
}

struct SimulationSpec
{
    Index n = 50;
    Index p = 200;
    Index q = 20;
    Index s = 5;
    double rho_x = 0.5;
    double snr = 1.0;
    Normalization normalization = Normalization::sqrt_n;
    std::uint64_t seed = 0;
    DesignKind design = DesignKind::toeplitz;
    double alpha = 2.0;  // incoherent design only
    NoiseModel noise = NoiseModel::snr;
    double sigma = 1.0;  // noise = sigma only
    double coef_scale = 1.0;

    void validate() const
    {
        detail::require(n >= 1, "sim.n must be at least 1");
        detail::require(p >= 1, "sim.p must be at least 1");
        detail::require(q >= 1, "sim.q must be at least 1");
        detail::require(s >= 0 && s <= p, "sim.s must satisfy 0 <= s <= p");
        detail::require(rho_x >= 0.0 && rho_x < 1.0, "sim.rho_x must lie in [0, 1)");
        detail::require(std::isfinite(snr) && snr > 0.0, "sim.snr must be positive");
        detail::require(std::isfinite(sigma) && sigma > 0.0, "sim.sigma must be positive");
        detail::require(std::isfinite(coef_scale) && coef_scale > 0.0, "sim.coef_scale must be positive");
        if (design == DesignKind::incoherent) {
            detail::require(std::isfinite(alpha) && alpha > 1.0, "sim.alpha must be greater than 1");
            detail::require(s >= 1, "sim.s must be positive for the incoherent design");
            detail::require(n >= p, "sim.n must be at least p for the incoherent design");
        }
    }

    bool operator==(const SimulationSpec&) const = default;
};

namespace stream {
inline constexpr std::uint64_t design = 1;
inline constexpr std::uint64_t coefficients = 2;
inline constexpr std::uint64_t noise_base = std::uint64_t{1} << 32;  // + replicate index
} // namespace stream

/// n x p design whose rows follow N(0, Toeplitz(rho)), columns rescaled per spec.normalization.
inline Matrix make_toeplitz_design(const SimulationSpec& spec)
{
    CounterRng rng(spec.seed, stream::design);
    const Matrix z = rng.gaussian_matrix(spec.n, spec.p);
    // x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j is the lower Cholesky factor of the Toeplitz covariance applied to z
    const double rho = spec.rho_x;
    const double innov = std::sqrt(1.0 - rho * rho);
    Matrix x(spec.n, spec.p);
    x.col(0) = z.col(0);
    for (Index j = 1; j < spec.p; ++j) x.col(j) = rho * x.col(j - 1) + innov * z.col(j);
    return normalize_columns(std::move(x), spec.normalization);
}

/**
 * Design with X^T X / n = (1 - m) I + m 11^T, m = 1 / (7 alpha s), built as
 * sqrt(n) Q L^T with Q having orthonormal columns and L L^T the target Gram matrix.
 */
inline Matrix make_incoherent_design(const SimulationSpec& spec)
{
    detail::require(spec.n >= spec.p, "incoherent design requires n >= p");
    CounterRng rng(spec.seed, stream::design);
    const Matrix g = rng.gaussian_matrix(spec.n, spec.p);
    Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix qmat = qr.householderQ() * Matrix::Identity(spec.n, spec.p);

    const double m = 1.0 / (7.0 * spec.alpha * static_cast<double>(spec.s));
    Matrix psi = Matrix::Constant(spec.p, spec.p, m);
    psi.diagonal().setOnes();
    Eigen::LLT<Matrix> llt(psi);
    if (llt.info() != Eigen::Success) throw NumericError("incoherent design: Gram target is not positive definite");
    const Matrix l = llt.matrixL();

    Matrix x = std::sqrt(static_cast<double>(spec.n)) * qmat * l.transpose();
    if (spec.normalization == Normalization::unit) x /= std::sqrt(static_cast<double>(spec.n));
    return x;
}

inline Matrix make_design(const SimulationSpec& spec)
{
    spec.validate();
    return spec.design == DesignKind::toeplitz ? make_toeplitz_design(spec) : make_incoherent_design(spec);
}

/// s rows drawn uniformly without replacement, filled with coef_scale * N(0, 1); all other rows zero.
inline Matrix make_coefficients(const SimulationSpec& spec)
{
    spec.validate();
    CounterRng rng(spec.seed, stream::coefficients);
    Matrix b = Matrix::Zero(spec.p, spec.q);
    std::vector<Index> rows = sample_without_replacement(rng, spec.p, spec.s);
    std::sort(rows.begin(), rows.end());
    for (Index j : rows) {
        for (Index k = 0; k < spec.q; ++k) {
            // a Gaussian draw of exactly 0 has probability 0 but would break |support| = s
            double v = 0.0;
            while (v == 0.0) v = rng.gaussian();
            b(j, k) = spec.coef_scale * v;
        }
    }
    return b;
}

struct NoiseDraw
{
    Matrix e;
    double sigma_star = 0.0;
};

/// E = sigma* G with sigma* = ||signal||_F / (snr ||G||_F), so the realized SNR is exactly `snr`.
inline NoiseDraw make_noise(const Eigen::Ref<const Matrix>& signal, double snr, std::uint64_t seed,
                            std::uint64_t replicate = 0)
{
    require_finite(signal, "make_noise signal");
    detail::require(std::isfinite(snr) && snr > 0.0, "make_noise: snr must be positive");
    const double sig = signal.norm();
    detail::require(sig > 0.0, "make_noise: signal is zero, SNR undefined");
    CounterRng rng(seed, stream::noise_base + replicate);
    const Matrix g = rng.gaussian_matrix(signal.rows(), signal.cols());
    NoiseDraw out;
    out.sigma_star = sig / (snr * g.norm());
    out.e = out.sigma_star * g;
    return out;
}

/// E = sigma* G.
inline Matrix make_population_noise(Index n, Index q, double sigma_star, std::uint64_t seed,
                                    std::uint64_t replicate = 0)
{
    detail::require(sigma_star > 0.0, "make_population_noise: sigma_star must be positive");
    CounterRng rng(seed, stream::noise_base + replicate);
    return sigma_star * rng.gaussian_matrix(n, q);
}

/**
 * Y = X B* + E. X and B* depend on the seed only; the noise also depends on
 * `replicate`, so replicates share the design and the coefficients.
 */
inline Dataset simulate(const SimulationSpec& spec, std::uint64_t replicate = 0)
{
    spec.validate();
    Dataset d;
    d.normalization = spec.normalization;
    d.x = make_design(spec);
    GroundTruth truth;
    truth.coef = make_coefficients(spec);
    truth.support = row_support(truth.coef);
    const Matrix signal = d.x * truth.coef;
    Matrix e;
    if (spec.noise == NoiseModel::snr) {
        NoiseDraw nd = make_noise(signal, spec.snr, spec.seed, replicate);
        e = std::move(nd.e);
        truth.sigma = nd.sigma_star;
    } else {
        e = make_population_noise(spec.n, spec.q, spec.sigma, spec.seed, replicate);
        truth.sigma = spec.sigma;
    }
    d.y = signal + e;
    d.truth = std::move(truth);
    return d;
}

struct EventFrequency
{
    EventId event = EventId::C4;
    double lambda = 0.0;
    std::size_t trials = 0;
    std::size_t hits = 0;
    double empirical = 0.0;
    std::optional<double> bound;  // empty when A is inadmissible for the event

    /// 3 sqrt(p_hat (1 - p_hat) / trials)
    double mc_slack() const
    {
        return 3.0 * std::sqrt(empirical * (1.0 - empirical) / static_cast<double>(trials));
    }
    bool dominates_bound() const { return !bound || empirical >= *bound - mc_slack(); }
};

/**
 * Empirical frequencies of several events over `trials` fresh draws E = sigma* G
 * (sigma* = spec.sigma), each evaluated on the same draws. Events use
 * event_lambda(id, ..., A, sigma*) unless `lambda` is given.
 */
inline std::vector<EventFrequency> mc_event_frequencies(const std::vector<EventId>& events,
                                                        const SimulationSpec& spec, std::optional<double> lambda,
                                                        double a, std::size_t trials)
{
    detail::require(trials >= 1000, "mc_event_frequency: trials must be at least 1000");
    const Matrix x = make_design(spec);
    std::vector<EventFrequency> out(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        out[k].event = events[k];
        out[k].trials = trials;
        out[k].lambda = lambda ? *lambda : event_lambda(events[k], spec.n, spec.q, spec.p, a, spec.sigma);
        try {
            out[k].bound = event_probability_bound(events[k], spec.n, spec.q, spec.p, a);
        } catch (const InvalidInput&) {
            out[k].bound.reset();
        }
    }
    for (std::size_t t = 0; t < trials; ++t) {
        const Matrix e = make_population_noise(spec.n, spec.q, spec.sigma, spec.seed, t);
        const NoiseStatistics st = noise_statistics(x, e);
        for (auto& f : out) {
            if (event_holds(f.event, st, f.lambda, spec.sigma)) ++f.hits;
        }
    }
    for (auto& f : out) f.empirical = static_cast<double>(f.hits) / static_cast<double>(trials);
    return out;
}

inline EventFrequency mc_event_frequency(EventId event, const SimulationSpec& spec, std::optional<double> lambda,
                                         double a, std::size_t trials)
{
    return mc_event_frequencies({event}, spec, lambda, a, trials).front();
}

} // namespace pivotal
