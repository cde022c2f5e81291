#include "sglmm/io.hpp"
#include "sglmm/kinship.hpp"
#include "sglmm/mixed_model.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace sglmm;

namespace {

KinshipSpectrum random_spectrum(Index n, Index rank, std::mt19937_64& rng) {
    const Matrix A = oracle::random_matrix(n, rank, rng);
    return eigendecompose(A * A.transpose() / static_cast<double>(rank));
}

// y = u + e with u ~ N(0, s2 K) and e ~ N(0, delta s2 I), k traits.
Matrix draw_null_phenotypes(const KinshipSpectrum& sp, double delta, double s2, Index k,
                            std::mt19937_64& rng) {
    const Index n = sp.size();
    const Matrix z = oracle::random_matrix(n, k, rng);
    const Matrix e = oracle::random_matrix(n, k, rng);
    const Vector root = sp.d.cwiseSqrt();
    return std::sqrt(s2) * (sp.U * (root.asDiagonal() * z)) + std::sqrt(delta * s2) * e;
}

// Log-likelihood of independent N(0, s2 (K + delta I)) columns, computed with
// a dense Cholesky factorization instead of the spectrum.
double dense_loglik(const Matrix& K, const Matrix& Y, double delta, double s2) {
    const Index n = K.rows();
    const Matrix V = s2 * (K + delta * Matrix::Identity(n, n));
    Eigen::LLT<Matrix> llt(V);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double total = 0.0;
    for (Index t = 0; t < Y.cols(); ++t) {
        const Vector y = Y.col(t);
        total += -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + logdet +
                         y.dot(llt.solve(y)));
    }
    return total;
}

}  // namespace

TEST(NullLoglik, HandEvaluatedSigma) {
    KinshipSpectrum sp{Matrix::Identity(4, 4), (Vector(4) << 2, 1, 1, 0).finished()};
    const Matrix y = Matrix::Ones(4, 1);
    const auto r = null_loglik(sp, y, 1.0);
    EXPECT_NEAR(r.sigma_g2, 0.25 * (1.0 / 3 + 0.5 + 0.5 + 1.0), 1e-15);
    EXPECT_NEAR(r.sigma_g2, 0.583333, 1e-6);
}

TEST(NullLoglik, MatchesDenseGaussianLikelihood) {
    std::mt19937_64 rng(8);
    const auto sp = random_spectrum(12, 5, rng);
    const Matrix Y = oracle::random_matrix(12, 3, rng);
    const Matrix K = sp.reconstruct();
    for (double delta : {0.01, 0.3, 2.0, 50.0}) {
        const auto r = null_loglik(sp, Y, delta);
        EXPECT_NEAR(r.loglik, dense_loglik(K, Y, delta, r.sigma_g2), 1e-8);
    }
}

TEST(NullLoglik, IdentityKinshipIsFlatRidge) {
    std::mt19937_64 rng(1);
    const Matrix Y = oracle::random_matrix(20, 2, rng);
    const auto sp = KinshipSpectrum::identity(20);
    const auto a = null_loglik(sp, Y, 0.1);
    const auto b = null_loglik(sp, Y, 10.0);
    EXPECT_NEAR(a.sigma_g2, Y.squaredNorm() / (40.0 * 1.1), 1e-12);
    EXPECT_NEAR(a.loglik, b.loglik, 1e-9);
}

TEST(NullLoglik, NonPositiveVarianceIsDomainError) {
    KinshipSpectrum sp{Matrix::Identity(2, 2), Vector::Zero(2)};
    EXPECT_THROW(null_loglik(sp, Matrix::Ones(2, 1), 0.0), InvalidInputError);
    sp.d(0) = -2.0;
    EXPECT_THROW(null_loglik(sp, Matrix::Ones(2, 1), 1.0), NumericError);
}

TEST(NullLoglik, ProfiledSigmaIsExactArgmax) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 5; ++rep) {
        const auto sp = random_spectrum(15, 4, rng);
        const Matrix Y = oracle::random_matrix(15, 2, rng);
        for (double delta : {0.05, 1.0, 20.0}) {
            const auto r = null_loglik(sp, Y, delta);
            const double at = null_loglik_full(sp, Y, delta, r.sigma_g2);
            EXPECT_NEAR(at, r.loglik, 1e-9 * std::abs(at));
            EXPECT_LE(null_loglik_full(sp, Y, delta, 1.01 * r.sigma_g2), at);
            EXPECT_LE(null_loglik_full(sp, Y, delta, 0.99 * r.sigma_g2), at);
        }
    }
}

TEST(FitNull, DominatesGridAndTrueDelta) {
    std::mt19937_64 rng(10);
    const auto grid = delta_grid();
    ASSERT_EQ(grid.size(), 100u);
    EXPECT_DOUBLE_EQ(grid.front(), 1e-5);
    EXPECT_DOUBLE_EQ(grid.back(), 1e5);
    for (int rep = 0; rep < 4; ++rep) {
        const auto sp = random_spectrum(120, 30, rng);
        const double delta_true = std::pow(10.0, rep - 1);
        const Matrix Y = draw_null_phenotypes(sp, delta_true, 1.0, 2, rng);
        const auto fit = fit_null(sp, Y);
        EXPECT_GE(fit.delta, kDeltaMin);
        EXPECT_LE(fit.delta, kDeltaMax);
        EXPECT_GT(fit.sigma_g2, 0.0);
        EXPECT_GE(fit.loglik, null_loglik(sp, Y, delta_true).loglik - 1e-6);
        for (double g : grid) EXPECT_GE(fit.loglik, null_loglik(sp, Y, g).loglik - 1e-9);
    }
}

TEST(FitNull, TrueDeltaOneAtN500) {
    std::mt19937_64 rng(77);
    const Matrix X = oracle::random_matrix(500, 300, rng);
    const auto sp = eigendecompose(compute_rrm(X));
    const Matrix Y = draw_null_phenotypes(sp, 1.0, 1.0, 1, rng);
    const auto fit = fit_null(sp, Y);
    EXPECT_GE(fit.loglik, null_loglik(sp, Y, 1.0).loglik - 1e-6);
    // Loose sanity: the estimate is in the right decade.
    EXPECT_GT(fit.delta, 0.1);
    EXPECT_LT(fit.delta, 10.0);
}

TEST(FitNull, IdentityKinshipTakesSmallestDelta) {
    std::mt19937_64 rng(2);
    const Matrix Y = oracle::random_matrix(30, 3, rng);
    EXPECT_EQ(fit_null(KinshipSpectrum::identity(30), Y).delta, kDeltaMin);
}

TEST(FitNull, PureNoiseOnStructuredKinshipGivesLargeDelta) {
    int upper = 0;
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        // Five populations around unit-scale centroids.
        const Matrix C = oracle::random_matrix(5, 200, rng);
        Matrix X(100, 200);
        for (Index i = 0; i < 100; ++i)
            X.row(i) = C.row(i % 5) + 0.07 * oracle::random_matrix(1, 200, rng);
        const auto sp = eigendecompose(compute_rrm(X));
        const Matrix Y = standardize_columns(oracle::random_matrix(100, 3, rng, std::sqrt(50.0)));
        if (fit_null(sp, Y).delta > 1.0) ++upper;
    }
    EXPECT_GE(upper, 9);
}

TEST(Rotate, IdentityKinshipScalesByHalf) {
    std::mt19937_64 rng(3);
    const Matrix X = oracle::random_matrix(6, 4, rng);
    const Matrix Y = oracle::random_matrix(6, 2, rng);
    const auto r = rotate(KinshipSpectrum::identity(6), NullFit{3.0, 1.0, 0.0}, X, Y);
    EXPECT_LT((r.X - X / 2.0).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((r.Y - Y / 2.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rotate, MatchesExplicitFormula) {
    std::mt19937_64 rng(4);
    const auto sp = random_spectrum(10, 6, rng);
    const Matrix X = oracle::random_matrix(10, 5, rng);
    const Matrix Y = oracle::random_matrix(10, 3, rng);
    const double delta = 0.4;
    const auto r = rotate(sp, NullFit{delta, 1.0, 0.0}, X, Y);
    Matrix scale = Matrix::Zero(10, 10);
    for (Index s = 0; s < 10; ++s) scale(s, s) = 1.0 / std::sqrt(sp.d(s) + delta);
    EXPECT_LT((r.X - scale * sp.U.transpose() * X).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.Y - scale * sp.U.transpose() * Y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rotate, WhiteningIdentity) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const auto sp = random_spectrum(40, 10, rng);
        const Matrix K = sp.reconstruct();
        const double delta = 0.7;
        const Matrix R = whitening_matrix(sp, delta);
        const Matrix I = Matrix::Identity(40, 40);
        EXPECT_LT((R * (K + delta * I) * R.transpose() - I).cwiseAbs().maxCoeff(), 1e-8);
        const double s2 = 2.5;
        EXPECT_LT((R * (s2 * K + delta * s2 * I) * R.transpose() - s2 * I).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Rotate, InverseTransformRecoversData) {
    std::mt19937_64 rng(6);
    const auto sp = random_spectrum(15, 15, rng);
    const Matrix X = oracle::random_matrix(15, 4, rng);
    const double delta = 0.25;
    const auto r = rotate(sp, NullFit{delta, 1.0, 0.0}, X, Matrix::Zero(15, 1));
    const Vector root = (sp.d.array() + delta).sqrt().matrix();
    const Matrix back = sp.U * (root.asDiagonal() * r.X);
    EXPECT_LT((back - X).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Rotate, RejectsIncompleteData) {
    auto g = make_genotypes(Matrix::Ones(3, 2));
    g.missing(1, 1) = true;
    auto p = make_phenotypes(Matrix::Ones(3, 1));
    EXPECT_THROW(rotate(KinshipSpectrum::identity(3), NullFit{}, g, p), InvalidInputError);
}
