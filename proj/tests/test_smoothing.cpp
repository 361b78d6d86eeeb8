#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <pivotal/random.hpp>
#include <pivotal/smoothing.hpp>

using namespace pivotal;

namespace {

Matrix with_norm(CounterRng& rng, Index r, Index c, double norm)
{
    const Matrix g = rng.gaussian_matrix(r, c);
    return g * (norm / g.norm());
}

/// (M M^T)^{1/2} via the symmetric eigen-decomposition.
Matrix psd_sqrt(const Matrix& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(m * m.transpose());
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

TEST(SmoothedFrobenius, Examples)
{
    EXPECT_DOUBLE_EQ(smoothed_frobenius(Matrix::Zero(2, 3), 1.0), 0.5);
    CounterRng rng(0, 0);
    const Matrix z = with_norm(rng, 3, 2, 0.7);
    EXPECT_NEAR(smoothed_frobenius(z, 0.7), 0.7, 1e-15);
    EXPECT_NEAR(smoothed_frobenius(with_norm(rng, 2, 2, 0.5), 1.0), 0.625, 1e-15);
}

TEST(SmoothedFrobenius, MatchesOracle)
{
    CounterRng rng(1, 0);
    for (int t = 0; t < 200; ++t) {
        const Index r = 1 + static_cast<Index>(rng.uniform_index(20));
        const Index c = 1 + static_cast<Index>(rng.uniform_index(20));
        const Matrix z = rng.gaussian_matrix(r, c) * (0.05 + 3.0 * rng.uniform());
        for (double smin : {0.1, 1.0, 10.0}) {
            EXPECT_NEAR(smoothed_frobenius(z, smin), smoothed_frobenius_oracle(z, smin), 1e-9);
        }
    }
    EXPECT_NEAR(smoothed_frobenius_oracle(Matrix::Zero(2, 2), 3.0), 1.5, 1e-12);
}

TEST(SmoothedFrobenius, MajorizesAndIsMonotone)
{
    CounterRng rng(2, 0);
    for (int t = 0; t < 100; ++t) {
        const Matrix z = rng.gaussian_matrix(3, 4) * rng.uniform();
        const double nz = z.norm();
        const double smin = 4.0 * rng.uniform() + 1e-3;
        const double v = smoothed_frobenius(z, smin);
        EXPECT_GE(v, nz * (1 - 1e-15));
        if (nz >= smin) EXPECT_NEAR(v, nz, 1e-15 * nz);
        else {
            EXPECT_GT(v, nz);
            EXPECT_GE(smoothed_frobenius(z, smin * 1.5), v);
        }
    }
}

TEST(OptimalSigma, Examples)
{
    CounterRng rng(3, 0);
    const Matrix z = with_norm(rng, 2, 3, 6.0);
    EXPECT_NEAR(optimal_sigma(z, 0.3), 6.0, 1e-14);
    EXPECT_EQ(optimal_sigma(z, 8.0), 8.0);
    EXPECT_EQ(optimal_sigma(Matrix::Zero(2, 2), 1.0), 1.0);
    // plugging back reproduces the smoothed value
    for (double smin : {0.3, 8.0}) {
        EXPECT_NEAR(concomitant_scalar_datafit(z, optimal_sigma(z, smin)), smoothed_frobenius(z, smin), 1e-10);
    }
}

TEST(OptimalCovarianceRoot, ZeroResidual)
{
    const SmoothingParams params{0.4, 3.0};
    const Matrix s = optimal_covariance_root(Matrix::Zero(4, 6), params);
    EXPECT_LE((s - 0.4 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OptimalCovarianceRoot, ClipsEachSingularValue)
{
    // R / sqrt(q) with singular values (3.0, 0.1) on a random orthonormal basis
    CounterRng rng(4, 0);
    const Index q = 5;
    Eigen::HouseholderQR<Matrix> qa(rng.gaussian_matrix(2, 2)), qb(rng.gaussian_matrix(q, q));
    const Matrix u = qa.householderQ();
    const Matrix v = Matrix(qb.householderQ()).leftCols(2);
    Vector g(2);
    g << 3.0, 0.1;
    const Matrix r = std::sqrt(static_cast<double>(q)) * u * g.asDiagonal() * v.transpose();
    const Matrix s = optimal_covariance_root(r, SmoothingParams{0.5, 2.0});

    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    EXPECT_NEAR(es.eigenvalues()(0), 0.5, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), 2.0, 1e-12);
    // eigenvector for 2.0 is the leading left singular vector
    EXPECT_NEAR(std::abs(es.eigenvectors().col(1).dot(u.col(0))), 1.0, 1e-12);
}

TEST(OptimalCovarianceRoot, UnclippedIsMatrixSquareRoot)
{
    CounterRng rng(5, 0);
    for (int t = 0; t < 20; ++t) {
        const Matrix r = rng.gaussian_matrix(3, 8);
        const Matrix s = optimal_covariance_root(r, SmoothingParams{1e-6, 1e6});
        EXPECT_LE((s - psd_sqrt(r / std::sqrt(8.0))).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(OptimalCovarianceRoot, SymmetricWithClippedSpectrum)
{
    CounterRng rng(6, 0);
    for (int t = 0; t < 50; ++t) {
        const Index n = 2 + static_cast<Index>(rng.uniform_index(6));
        const Index q = 1 + static_cast<Index>(rng.uniform_index(8));
        const Matrix r = rng.gaussian_matrix(n, q) * (0.2 + 2.0 * rng.uniform());
        const SmoothingParams params{0.3 + rng.uniform(), 0.0};
        const SmoothingParams p2{params.sigma_min, params.sigma_min + 2.0 * rng.uniform()};
        const Matrix s = optimal_covariance_root(r, p2);
        EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues();
        EXPECT_GE(ev.minCoeff(), p2.sigma_min - 1e-12);
        EXPECT_LE(ev.maxCoeff(), p2.sigma_max + 1e-12);
        // plugging S back reproduces the smoothed nuclear value
        EXPECT_NEAR(concomitant_matrix_datafit(r, s), smoothed_nuclear(r, p2), 1e-10);
    }
}

TEST(OptimalCovarianceRoot, RejectsInfiniteSigmaMax)
{
    EXPECT_THROW(optimal_covariance_root(Matrix::Ones(2, 2), SmoothingParams{1.0, infinity}), InvalidInput);
    EXPECT_THROW(optimal_covariance_root(Matrix::Ones(2, 2), SmoothingParams{2.0, 1.0}), InvalidInput);
}

TEST(SmoothedNuclear, Examples)
{
    EXPECT_NEAR(smoothed_nuclear(Matrix::Zero(3, 4), SmoothingParams{0.8, 5.0}), 0.4, 1e-15);

    CounterRng rng(7, 0);
    const Matrix r = rng.gaussian_matrix(4, 6);
    const double unclipped = singular_values(r / std::sqrt(6.0)).sum() / 4.0;
    EXPECT_NEAR(smoothed_nuclear(r, SmoothingParams{1e-9, infinity}), unclipped, 1e-8);
}

TEST(SmoothedNuclear, PadsWhenQBelowN)
{
    // q < n: n - q singular values are zero and contribute sigma_min / 2 each
    CounterRng rng(8, 0);
    const Matrix r = rng.gaussian_matrix(5, 2);
    const SmoothingParams params{0.2, 10.0};
    const Vector g = singular_values(r / std::sqrt(2.0));
    double expected = 3.0 * 0.1;
    for (Index i = 0; i < g.size(); ++i) expected += clipped_spectral_value(g(i), params);
    EXPECT_NEAR(smoothed_nuclear(r, params), expected / 5.0, 1e-14);
}

TEST(SmoothedNuclear, MatchesProjectedGradientOracle)
{
    CounterRng rng(9, 0);
    const SmoothingParams params{0.5, 2.0};
    for (int t = 0; t < 10; ++t) {
        const Matrix r = rng.gaussian_matrix(3, 5) * (0.3 + 1.5 * rng.uniform());
        const double closed = smoothed_nuclear(r, params);
        const double oracle = smoothed_nuclear_oracle(r, params, 20, static_cast<std::uint64_t>(t));
        EXPECT_NEAR(closed, oracle, 1e-6);
    }
}

TEST(SmoothedNuclear, OracleWithoutUpperClip)
{
    CounterRng rng(10, 0);
    const Matrix r = rng.gaussian_matrix(2, 3);
    const SmoothingParams params{0.1, infinity};
    EXPECT_NEAR(smoothed_nuclear(r, params), smoothed_nuclear_oracle(r, params, 10, 1), 1e-6);
}

TEST(SmoothedNuclear, OracleIsNotSeededAtTheAnswer)
{
    // the oracle has to travel: its random starts are far from the closed form
    CounterRng rng(12, 0);
    const Matrix r = rng.gaussian_matrix(3, 5);
    const SmoothingParams params{0.5, 2.0};
    const double closed = smoothed_nuclear(r, params);
    EXPECT_GT(smoothed_nuclear_oracle(r, params, 1, 99), closed - 1e-12);
    EXPECT_NEAR(smoothed_nuclear_oracle(r, params, 1, 99), closed, 1e-6);
}
