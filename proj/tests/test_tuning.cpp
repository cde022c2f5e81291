#include "sglmm/tuning.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

using namespace sglmm;

TEST(Folds, StridePartition) {
    EXPECT_EQ(fold_rows(4, 2, 0), (std::vector<Index>{0, 2}));
    EXPECT_EQ(fold_rows(4, 2, 1), (std::vector<Index>{1, 3}));
    EXPECT_EQ(fold_rows(7, 3, 2), (std::vector<Index>{2, 5}));
}

TEST(CvGrid, LogSpacedFromLambdaMax) {
    const auto grid = cv_lambda_grid(50.0);
    ASSERT_EQ(grid.size(), 10u);
    EXPECT_DOUBLE_EQ(grid.front(), 50.0);
    EXPECT_NEAR(grid.back(), 0.05, 1e-12);
    for (std::size_t i = 1; i < grid.size(); ++i)
        EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(1e-3, 1.0 / 9.0), 1e-12);
}

TEST(CrossValidate, PureNoiseSelectsLambdaMax) {
    // Chance overfitting can favor the second grid point by a hair; anything
    // smaller would mean the held-out error is not being measured.
    int at_max = 0;
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        RotatedData d{oracle::random_matrix(100, 40, rng), oracle::random_matrix(100, 2, rng)};
        const auto res = cross_validate(d, 1.0, FusionOperator::none(2));
        if (res.lambda_star == lambda_max(d, 1.0)) ++at_max;
        EXPECT_GE(res.lambda_star, res.cv_table[1].lambda) << "seed " << seed;
    }
    EXPECT_GE(at_max, 8);
}

TEST(CrossValidate, PlantedSignalIsFound) {
    std::mt19937_64 rng(3);
    RotatedData d{oracle::random_matrix(120, 30, rng), Matrix()};
    d.Y = 2.0 * d.X.col(7) + oracle::random_matrix(120, 1, rng);
    const auto res = cross_validate(d, 1.0, FusionOperator::none(1));
    EXPECT_LT(res.lambda_star, lambda_max(d, 1.0));
    const auto fit = solve(d, 1.0, res.lambda_star, FusionOperator::none(1));
    EXPECT_NE(fit.beta(7, 0), 0.0);
    bool listed = false;
    for (const auto& p : res.cv_table) listed = listed || p.lambda == res.lambda_star;
    EXPECT_TRUE(listed);
}

TEST(CrossValidate, TiesGoToLargerLambda) {
    // Y = 0: every lambda gives beta = 0 and the same error.
    std::mt19937_64 rng(4);
    RotatedData d{oracle::random_matrix(20, 5, rng), Matrix::Zero(20, 1)};
    d.Y(0, 0) = 1e-3;
    const auto res = cross_validate(d, 1.0, FusionOperator::none(1), 4);
    EXPECT_DOUBLE_EQ(res.lambda_star, res.cv_table.front().lambda);
}

TEST(CrossValidate, Deterministic) {
    std::mt19937_64 rng(5);
    RotatedData d{oracle::random_matrix(50, 12, rng), oracle::random_matrix(50, 3, rng)};
    d.Y.col(0) += d.X.col(2);
    TraitGraph g;
    g.k = 3;
    g.edges = {{0, 1, 0.8}};
    const auto H = FusionOperator::from_graph(g, 1.0);
    const auto a = cross_validate(d, 1.0, H);
    const auto b = cross_validate(d, 1.0, H);
    ASSERT_EQ(a.cv_table.size(), b.cv_table.size());
    for (std::size_t i = 0; i < a.cv_table.size(); ++i) {
        EXPECT_EQ(a.cv_table[i].lambda, b.cv_table[i].lambda);
        EXPECT_EQ(a.cv_table[i].mean_error, b.cv_table[i].mean_error);
    }
}

TEST(CrossValidate, BadFoldCount) {
    RotatedData d{Matrix::Ones(3, 2), Matrix::Ones(3, 1)};
    EXPECT_THROW(cross_validate(d, 1.0, FusionOperator::none(1), 1), ConfigError);
    EXPECT_THROW(cross_validate(d, 1.0, FusionOperator::none(1), 4), ConfigError);
}

TEST(CrossValidate, CsvExport) {
    sglmm::testing::TempDir dir;
    TuningResult r;
    r.cv_table = {{2.0, 10.5}, {1.0, 9.25}};
    write_cv_table(dir / "x.cv.csv", r);
    EXPECT_EQ(sglmm::testing::read_bytes(dir / "x.cv.csv"), "lambda,mean_error\n2,10.5\n1,9.25\n");
}

TEST(Snum, DenseEndReachesFullSupport) {
    std::mt19937_64 rng(6);
    RotatedData d{oracle::random_matrix(60, 10, rng), oracle::random_matrix(60, 2, rng)};
    auto [beta, res] = select_by_snum(d, 1.0, FusionOperator::none(2), 10);
    EXPECT_GE(mean_nonzero_per_trait(beta), 9.0);
    EXPECT_FALSE(res.warning);
}

TEST(Snum, BisectionHitsTarget) {
    for (int seed = 0; seed < 3; ++seed) {
        std::mt19937_64 rng(10 + seed);
        RotatedData d{oracle::random_matrix(80, 60, rng), oracle::random_matrix(80, 3, rng)};
        d.Y.col(0) += d.X.col(0) + d.X.col(1);
        TraitGraph g;
        g.k = 3;
        g.edges = {{0, 1, 0.7}, {1, 2, -0.8}};
        const auto H = FusionOperator::from_graph(g, 0.5);
        const double lmax = lambda_max(d, 1.0);
        auto [beta, res] = select_by_snum(d, 1.0, H, 10);
        EXPECT_EQ(detail::count_nonzero(solve(d, 1.0, lmax, FusionOperator::none(3)).beta), 0);
        ASSERT_TRUE(res.snum_achieved.has_value());
        EXPECT_GE(*res.snum_achieved, 9.0);
        EXPECT_LE(*res.snum_achieved, 11.0);
        EXPECT_EQ(mean_nonzero_per_trait(beta), *res.snum_achieved);
        EXPECT_LE(res.snum_trace.size(), 30u);
        for (const auto& [lambda, count] : res.snum_trace) {
            EXPECT_GE(lambda, lmax * 1e-6);
            EXPECT_LE(lambda, lmax);
        }
    }
}

TEST(Snum, RejectsOutOfRangeTarget) {
    RotatedData d{Matrix::Ones(4, 3), Matrix::Ones(4, 1)};
    EXPECT_THROW(select_by_snum(d, 1.0, FusionOperator::none(1), 0), ConfigError);
    EXPECT_THROW(select_by_snum(d, 1.0, FusionOperator::none(1), 4), ConfigError);
}

TEST(Snum, UnreachableTargetSetsWarning) {
    std::mt19937_64 rng(7);
    Matrix X = oracle::random_matrix(40, 2, rng);
    X.col(1) = X.col(0);
    RotatedData d{X, Matrix()};
    d.Y = X.col(0) + 0.1 * oracle::random_matrix(40, 1, rng);
    auto [beta, res] = select_by_snum(d, 1.0, FusionOperator::none(1), 1);
    // Identical columns enter together: the count is 0 or 2, never 1.
    EXPECT_TRUE(res.warning);
    EXPECT_NE(*res.snum_achieved, 1.0);
}
