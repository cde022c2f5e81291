#include "sglmm/pipeline.hpp"
#include "sglmm/simulate.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace sglmm;

namespace {

SimulatedDataset small_dataset(std::uint64_t seed) {
    SimulationParams p;
    p.n = 120;
    p.j = 150;
    p.k = 6;
    p.sigma_e2 = 1.0;
    p.sigma_t2 = 1.0;
    p.sigma_s2 = 0.05;
    p.seed = seed;
    return simulate(p);
}

}  // namespace

TEST(Pipeline, FixedLambdaMatchesDirectSolve) {
    const auto ds = small_dataset(1);
    PipelineOptions opts;
    opts.lambda = 5.0;
    const auto res = run_pipeline(ds.X, ds.Y, opts);
    EXPECT_FALSE(res.ran_cv);
    EXPECT_EQ(res.lambda, 5.0);

    const auto sp = eigendecompose(compute_rrm(ds.X));
    const auto null = fit_null(sp, ds.Y);
    EXPECT_DOUBLE_EQ(res.null_fit.delta, null.delta);
    const auto data = rotate(sp, null, ds.X, ds.Y);
    const auto H = FusionOperator::from_graph(build_graph(ds.Y), 1.0);
    EXPECT_EQ(res.beta, solve(data, null.sigma_g2, 5.0, H).beta);
}

TEST(Pipeline, CrossValidationPath) {
    const auto ds = small_dataset(2);
    const auto res = run_pipeline(ds.X, ds.Y, {});
    EXPECT_TRUE(res.ran_cv);
    EXPECT_EQ(res.tuning.cv_table.size(), 10u);
    EXPECT_EQ(res.lambda, res.tuning.lambda_star);
    EXPECT_EQ(res.beta.rows(), 150);
    EXPECT_EQ(res.beta.cols(), 6);
}

TEST(Pipeline, SnumPath) {
    const auto ds = small_dataset(3);
    PipelineOptions opts;
    opts.snum = 10;
    const auto res = run_pipeline(ds.X, ds.Y, opts);
    ASSERT_TRUE(res.tuning.snum_achieved.has_value());
    EXPECT_NEAR(mean_nonzero_per_trait(res.beta), 10.0, 1.0);
}

TEST(Pipeline, IdentityKinshipSkipsConfoundingCorrection) {
    const auto ds = small_dataset(4);
    PipelineOptions opts;
    opts.lambda = 3.0;
    opts.identity_kinship = true;
    const auto res = run_pipeline(ds.X, ds.Y, opts);
    const auto sp = KinshipSpectrum::identity(ds.X.rows());
    const auto null = fit_null(sp, ds.Y);
    EXPECT_DOUBLE_EQ(res.null_fit.sigma_g2, null.sigma_g2);
    const auto data = rotate(sp, null, ds.X, ds.Y);
    const auto H = FusionOperator::from_graph(build_graph(ds.Y), 1.0);
    EXPECT_EQ(res.beta, solve(data, null.sigma_g2, 3.0, H).beta);
}

TEST(Pipeline, PrecomputedSpectrumIsUsed) {
    const auto ds = small_dataset(5);
    PipelineOptions a;
    a.lambda = 4.0;
    PipelineOptions b = a;
    b.spectrum = eigendecompose(compute_rrm(ds.X));
    EXPECT_EQ(run_pipeline(ds.X, ds.Y, a).beta, run_pipeline(ds.X, ds.Y, b).beta);
}

TEST(Pipeline, GammaZeroEqualsNoGraph) {
    const auto ds = small_dataset(6);
    PipelineOptions a;
    a.lambda = 4.0;
    a.gamma = 0.0;
    PipelineOptions b = a;
    b.rho = 0.999999;
    const auto ra = run_pipeline(ds.X, ds.Y, a);
    const auto rb = run_pipeline(ds.X, ds.Y, b);
    EXPECT_LT((ra.beta - rb.beta).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pipeline, Errors) {
    const auto ds = small_dataset(7);
    PipelineOptions opts;
    opts.lambda = 1.0;
    opts.snum = 5;
    EXPECT_THROW(run_pipeline(ds.X, ds.Y, opts), ConfigError);
    EXPECT_THROW(run_pipeline(ds.X, ds.Y.topRows(10), {}), InvalidInputError);
}

TEST(Pipeline, Deterministic) {
    const auto ds = small_dataset(8);
    PipelineOptions opts;
    opts.snum = 5;
    const auto a = run_pipeline(ds.X, ds.Y, opts);
    const auto b = run_pipeline(ds.X, ds.Y, opts);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.lambda, b.lambda);
}

TEST(Pipeline, LogCallbackReceivesMessages) {
    const auto ds = small_dataset(9);
    std::vector<std::string> lines;
    PipelineOptions opts;
    opts.lambda = 2.0;
    opts.log = [&](const std::string& s) { lines.push_back(s); };
    run_pipeline(ds.X, ds.Y, opts);
    EXPECT_GE(lines.size(), 3u);
}
