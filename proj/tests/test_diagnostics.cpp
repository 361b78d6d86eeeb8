#include <gtest/gtest.h>

#include <numbers>

#include <Eigen/QR>

#include <pivotal/diagnostics.hpp>
#include <pivotal/simulate.hpp>

using namespace pivotal;

namespace {

Matrix orthogonal_design(Index n, Index p)
{
    CounterRng rng(1, 1);
    Eigen::HouseholderQR<Matrix> qr(rng.gaussian_matrix(n, p));
    return std::sqrt(static_cast<double>(n)) * (qr.householderQ() * Matrix::Identity(n, p));
}

/// Design with X^T X / n = (1 - m) I + m 11^T, built independently of simulate.
Matrix constant_correlation_design(Index n, Index p, double m, std::uint64_t seed)
{
    CounterRng rng(seed, 4);
    Eigen::HouseholderQR<Matrix> qr(rng.gaussian_matrix(n, p + 1));
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p + 1);
    // X_j = sqrt(n) (sqrt(1 - m) e_j + sqrt(m) e_0) on orthonormal columns
    Matrix x(n, p);
    for (Index j = 0; j < p; ++j) x.col(j) = std::sqrt(static_cast<double>(n)) * (std::sqrt(1 - m) * q.col(j + 1) + std::sqrt(m) * q.col(0));
    return x;
}

SimulationSpec incoherent_spec()
{
    SimulationSpec s;
    s.n = 200;
    s.p = 50;
    s.q = 10;
    s.s = 2;
    s.alpha = 2.0;
    s.design = DesignKind::incoherent;
    s.noise = NoiseModel::sigma;
    s.sigma = 1.0;
    s.seed = 3;
    return s;
}

Matrix random_cone_vector(CounterRng& rng, Index p, Index q, const Support& support)
{
    Matrix d = Matrix::Zero(p, q);
    for (Index j : support) d.row(j) = rng.gaussian_matrix(1, q);
    const Support off = complement(support, p);
    Matrix o = Matrix::Zero(p, q);
    for (Index j : off)
        if (rng.uniform() < 0.3) o.row(j) = rng.gaussian_matrix(1, q);
    const double in = row_norms(d).sum(), out = row_norms(o).sum();
    if (out > 0) d += o * (3.0 * in * rng.uniform() / out);
    return d;
}

} // namespace

TEST(Incoherence, OrthogonalDesignIsUnbounded)
{
    EXPECT_TRUE(std::isinf(incoherence_alpha(std::sqrt(20.0) * Matrix::Identity(20, 5), 2)));
    // rounding leaves only ~1e-16 correlations
    EXPECT_GT(incoherence_alpha(orthogonal_design(20, 5), 2), 1e12);
}

TEST(Incoherence, InvertsTheDefinition)
{
    const Index s = 3;
    EXPECT_NEAR(incoherence_alpha(constant_correlation_design(40, 6, 1.0 / (14.0 * s), 1), s), 2.0, 1e-9);
    EXPECT_NEAR(incoherence_alpha(constant_correlation_design(40, 6, 1.0 / (7.0 * s), 2), s), 1.0, 1e-9);
}

TEST(Incoherence, RejectsUnnormalizedColumn)
{
    Matrix x = orthogonal_design(20, 5);
    x.col(3) *= 1.1;
    try {
        incoherence_alpha(x, 1);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("column 3"), std::string::npos);
    }
}

TEST(Incoherence, SimulatedDesignHitsAlpha)
{
    const SimulationSpec spec = incoherent_spec();
    EXPECT_NEAR(incoherence_alpha(make_design(spec), spec.s), 2.0, 1e-9 * 2.0);
}

TEST(Rep, IsometryGivesAtLeastOne)
{
    EXPECT_GE(rep_ratio(orthogonal_design(30, 10), {0, 4}, 500, 0), 1.0 - 1e-6);
}

TEST(Rep, IncoherentDesignRespectsLowerBound)
{
    const SimulationSpec spec = incoherent_spec();
    const Matrix x = make_design(spec);
    EXPECT_GE(rep_ratio(x, {5, 17}, 10000, 1), std::sqrt(1.0 - 1.0 / 2.0) - 0.05);
}

TEST(Rep, MatchesExhaustiveGridInTwoDimensions)
{
    CounterRng rng(3, 3);
    for (int t = 0; t < 5; ++t) {
        Matrix x = rng.gaussian_matrix(6, 2);
        x.col(1) += 0.8 * x.col(0);
        x = normalize_columns(x, Normalization::sqrt_n);
        double grid_min = infinity;
        const int steps = 200000;
        for (int k = 0; k < steps; ++k) {
            const double th = 2.0 * std::numbers::pi * k / steps;
            Vector d(2);
            d << std::cos(th), std::sin(th);
            if (std::abs(d(1)) > 3.0 * std::abs(d(0))) continue;
            grid_min = std::min(grid_min, (x * d).norm() / (std::sqrt(6.0) * std::abs(d(0))));
        }
        const double r = rep_ratio(x, {0}, 1000, static_cast<std::uint64_t>(t));
        EXPECT_GE(r, grid_min - 1e-9);
        EXPECT_LE(r, grid_min + 1e-3);
    }
}

TEST(Rep, RejectsEmptySupport)
{
    EXPECT_THROW(rep_ratio(orthogonal_design(10, 3), {}, 10, 0), InvalidInput);
}

TEST(Cone, Ratios)
{
    Matrix d = Matrix::Zero(4, 2);
    d.row(1) << 3, 4;
    EXPECT_EQ(cone_ratio(d, {1}), 0.0);
    d.row(2) << 0, 5;
    EXPECT_DOUBLE_EQ(cone_ratio(d, {1}), 1.0);
    EXPECT_TRUE(std::isinf(cone_ratio(d, {0})));
    EXPECT_EQ(cone_ratio(Matrix::Zero(4, 2), {0}), 0.0);
}

TEST(Eta, Examples)
{
    EXPECT_EQ(eta(0.3, Matrix::Zero(3, 2), 1.0), 0.0);
    Matrix b = Matrix::Zero(3, 2);
    b.row(0) << 3, 4;
    EXPECT_DOUBLE_EQ(eta(0.1, b, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(eta(0.1, b, 2.0), 0.25);
    EXPECT_THROW(eta(0.1, b, 0.0), InvalidInput);
}

TEST(Supnorm, ConstantAndExactFit)
{
    EXPECT_NEAR(incoherence_constant(2.0), 23.0 / 7.0, 1e-15);
    EXPECT_THROW(incoherence_constant(1.0), InvalidInput);

    Dataset d;
    d.x = orthogonal_design(10, 3);
    GroundTruth t;
    t.coef = Matrix::Zero(3, 2);
    t.coef.row(1) << 1, -1;
    t.support = {1};
    t.sigma = 0.5;
    d.truth = t;
    d.y = d.x * t.coef;
    FitResult f;
    f.coef = t.coef;
    const SupnormCheck c = supnorm_bound_check(f, d, 0.2, 2.0);
    EXPECT_EQ(c.lhs, 0.0);
    EXPECT_TRUE(c.holds);
    EXPECT_NEAR(c.rhs, 23.0 / 7.0 * (3.0 + 0.2 * std::sqrt(2.0) / 0.5) * 0.2 * 0.5, 1e-14);
    EXPECT_THROW(supnorm_bound_check(f, d, 0.2, 0.9), InvalidInput);
}

TEST(Support, Estimation)
{
    EXPECT_TRUE(estimate_support(Matrix::Zero(4, 3), 0.0).empty());
    Matrix b = Matrix::Zero(4, 2);
    b.row(0) << 0.1, 0;
    b.row(3) << 2, 2;
    EXPECT_EQ(estimate_support(b, 0.0), (Support{0, 3}));
    EXPECT_EQ(estimate_support(b, 0.5), (Support{3}));
    EXPECT_EQ(estimate_support(b, 0.0), row_support(b));
    const Recovery r = recovery({0, 3}, {3});
    EXPECT_FALSE(r.hard);
    EXPECT_EQ(r.true_positives, 1);
    EXPECT_EQ(r.false_positives, 1);
    EXPECT_TRUE(recovery({3}, {3}).hard);
}

TEST(Events, C4Examples)
{
    const Matrix x = orthogonal_design(6, 3);
    EXPECT_FALSE(event_holds(EventId::C4, x, Matrix::Zero(6, 4), 0.1, 1.0));
    CounterRng rng(4, 4);
    Matrix e = rng.gaussian_matrix(6, 4);
    e *= 0.7 * std::sqrt(24.0) / e.norm();
    EXPECT_TRUE(event_holds(EventId::C4, x, e, 0.1, 0.7));
}

TEST(Events, NamesRoundTrip)
{
    for (EventId id : all_events) EXPECT_EQ(event_from_string(to_string(id)), id);
    EXPECT_THROW(event_from_string("C7"), InvalidInput);
}

TEST(Events, DecompositionsOnManyDraws)
{
    SimulationSpec spec;
    spec.n = 20;
    spec.q = 12;
    spec.p = 50;
    spec.s = 2;
    spec.seed = 8;
    const Matrix x = make_design(spec);
    const double lambda = proposed_lambda(20, 12, 50, 2.0);
    int a1 = 0, c3c4 = 0;
    for (std::uint64_t t = 0; t < 10000; ++t) {
        const Matrix e = make_population_noise(20, 12, 1.0, 8, t);
        const NoiseStatistics st = noise_statistics(x, e);
        const bool c3 = event_holds(EventId::C3, st, lambda, 1.0);
        const bool c4 = event_holds(EventId::C4, st, lambda, 1.0);
        const bool c5 = event_holds(EventId::C5, st, lambda, 1.0);
        const bool c6 = event_holds(EventId::C6, st, lambda, 1.0);
        const bool ev_a1 = event_holds(EventId::A1, st, lambda, 1.0);
        EXPECT_EQ(event_holds(EventId::A2, st, lambda, 1.0), c3 && c5 && c6);
        if (c3 && c4) EXPECT_TRUE(ev_a1);
        if (ev_a1) EXPECT_TRUE(c4);
        a1 += ev_a1;
        c3c4 += c3 && c4;
    }
    EXPECT_GE(a1, c3c4);
}

TEST(Events, MatrixOverloadAgreesWithStatistics)
{
    const Matrix x = orthogonal_design(10, 4);
    CounterRng rng(6, 6);
    const Matrix e = rng.gaussian_matrix(10, 30);
    for (EventId id : all_events) {
        EXPECT_EQ(event_holds(id, x, e, 0.3, 1.0), event_holds(id, noise_statistics(x, e), 0.3, 1.0));
    }
}

TEST(Bounds, A1Value)
{
    // 1 - 10^(1 - 2) - (1 + e^2) e^(-10)
    const double expected = 1.0 - 0.1 - (1.0 + std::exp(2.0)) * std::exp(-10.0);
    EXPECT_NEAR(event_probability_bound(EventId::A1, 12, 20, 10, 2.0), expected, 1e-15);
    EXPECT_NEAR(event_probability_bound(EventId::A1, 12, 20, 10, 2.0), 0.89962, 1e-5);
}

TEST(Bounds, Limits)
{
    const double noise_only = 1.0 - (1.0 + std::exp(2.0)) * std::exp(-240.0 / 24.0);
    EXPECT_NEAR(event_probability_bound(EventId::A1, 12, 20, 10, 40.0), noise_only, 1e-12);
    EXPECT_NEAR(event_probability_bound(EventId::A1, 1000, 1000, 10, 2.0), 0.9, 1e-12);
    EXPECT_NEAR(event_probability_bound(EventId::C1, 10, 1, 100, 4.0), 1.0 - 2.0 * std::pow(100.0, -1.0), 1e-15);
}

TEST(Bounds, ClampedAndAdmissible)
{
    EXPECT_EQ(event_probability_bound(EventId::C5, 50, 20, 200, 2.0), 0.0);
    EXPECT_THROW(event_probability_bound(EventId::C1, 20, 12, 50, 2.0), InvalidInput);
    EXPECT_THROW(event_probability_bound(EventId::A1, 20, 12, 50, 1.4), InvalidInput);
    EXPECT_NO_THROW(event_probability_bound(EventId::C4, 20, 12, 50, 0.0));
    for (EventId id : {EventId::C3, EventId::C4, EventId::C6, EventId::A1, EventId::A2}) {
        const double b = event_probability_bound(id, 20, 12, 50, 2.0);
        EXPECT_GE(b, 0.0);
        EXPECT_LE(b, 1.0);
    }
    // A1 never exceeds what C3 and C4 give through the union bound
    const double a1 = event_probability_bound(EventId::A1, 20, 12, 50, 2.0);
    const double c3 = event_probability_bound(EventId::C3, 20, 12, 50, 2.0);
    const double c4 = event_probability_bound(EventId::C4, 20, 12, 50, 2.0);
    EXPECT_LE(a1, c3 + c4 - 1.0 + 1e-15);
}

TEST(Chain, OrthogonalDesignAlwaysHolds)
{
    const Matrix x = orthogonal_design(20, 6);
    CounterRng rng(7, 7);
    for (int t = 0; t < 100; ++t) {
        EXPECT_TRUE(delta_psi_chain_check(random_cone_vector(rng, 6, 2, {1, 4}), x, 2.0, {1, 4}));
    }
}

TEST(Chain, ConstantCorrelationDesign)
{
    const Index p = 30, s = 3;
    const Matrix x = constant_correlation_design(60, p, 1.0 / (14.0 * s), 9);
    const Support support{2, 11, 25};
    CounterRng rng(9, 9);
    for (int t = 0; t < 10000; ++t) {
        ASSERT_TRUE(delta_psi_chain_check(random_cone_vector(rng, p, 2, support), x, 2.0, support));
    }
}

TEST(Chain, PreconditionsReportedDistinctly)
{
    const Matrix x = constant_correlation_design(40, 8, 1.0 / 14.0, 10);
    Matrix d = Matrix::Zero(8, 1);
    d(0, 0) = 1.0;
    d(5, 0) = 4.0;
    try {
        delta_psi_chain_check(d, x, 2.0, {0});
        FAIL();
    } catch (const ChainPreconditionError& e) {
        EXPECT_EQ(e.reason(), ChainPreconditionError::Reason::cone);
    }
    d(5, 0) = 1.0;
    try {
        delta_psi_chain_check(d, x, 3.0, {0});
        FAIL();
    } catch (const ChainPreconditionError& e) {
        EXPECT_EQ(e.reason(), ChainPreconditionError::Reason::incoherence);
    }
    EXPECT_NO_THROW(delta_psi_chain_check(d, x, 2.0, {0}));
}

TEST(ResidualSpectrum, ZeroFitAndInterpolation)
{
    CounterRng rng(11, 0);
    const Matrix x = normalize_columns(rng.gaussian_matrix(8, 30), Normalization::sqrt_n);
    const Matrix y = rng.gaussian_matrix(8, 3);
    const double lmax = lambda_max(EstimatorKind::mt_lasso, x, y);
    const FitResult zero = fit_mt_lasso(x, y, lmax);
    EXPECT_LE((residual_spectrum(zero) - singular_values(y)).norm(), 1e-12);

    SolverControls c;
    c.tol = 1e-6;
    c.max_epochs = 200000;
    const FitResult interp = fit_mt_lasso(x, y, 1e-9 * lmax, c);
    EXPECT_LE(residual_spectrum(interp).maxCoeff(), 1e-6 * singular_values(y)(0));
}

TEST(Report, DiagnoseFillsEveryField)
{
    SimulationSpec spec = incoherent_spec();
    const Dataset d = simulate(spec, 0);
    const double lambda = proposed_lambda(spec.n, spec.q, spec.p, 2.0);
    const FitResult f = fit_scl(d.x, d.y, lambda, 0.5);
    DiagnoseOptions opts;
    opts.rep_trials = 200;
    opts.sigma_min = 0.5;
    const DiagnosticsReport r = diagnose(f, d, lambda, opts);
    EXPECT_LE(r.dantzig_margin, 1e-6 * lambda);
    EXPECT_NEAR(r.incoherence_alpha, 2.0, 1e-8);
    EXPECT_GT(r.rep_ratio, 0.0);
    EXPECT_GE(r.supnorm_lhs, 0.0);
    EXPECT_GE(r.supnorm_rhs, 0.0);
    EXPECT_EQ(r.events.size(), all_events.size());
    EXPECT_EQ(r.recovery.hard, r.support_hat == d.truth->support);
}
