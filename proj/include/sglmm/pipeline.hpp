#pragma once

// End-to-end association: kinship -> null model -> rotation -> trait graph ->
// lambda selection -> fused lasso solve.

#include "sglmm/common.hpp"
#include "sglmm/kinship.hpp"
#include "sglmm/mixed_model.hpp"
#include "sglmm/solver.hpp"
#include "sglmm/trait_graph.hpp"
#include "sglmm/tuning.hpp"

#include <functional>
#include <optional>
#include <string>

namespace sglmm {

struct PipelineOptions {
    double rho = kDefaultCorrelationThreshold;
    double gamma = 1.0;
    std::optional<double> lambda;   // fixed lambda
    std::optional<int> snum;        // target per-trait selection count
    int folds = kDefaultFolds;
    // Replace the kinship by the identity (no confounding correction).
    bool identity_kinship = false;
    SolverOptions solver;
    // Optional precomputed spectrum of K (e.g. from the cache).
    std::optional<KinshipSpectrum> spectrum;
    std::function<void(const std::string&)> log;
};

struct PipelineResult {
    Matrix beta;
    NullFit null_fit;
    TraitGraph graph;
    double lambda = 0.0;
    TuningResult tuning;
    bool ran_cv = false;
};

// X: n x j complete genotypes, Y: n x k complete standardized phenotypes.
inline PipelineResult run_pipeline(const Matrix& X, const Matrix& Y, const PipelineOptions& opts) {
    if (X.rows() != Y.rows()) throw InvalidInputError("genotype and phenotype sample counts differ");
    if (opts.lambda && opts.snum) throw ConfigError("lambda and snum are mutually exclusive");
    auto log = [&](const std::string& msg) {
        if (opts.log) opts.log(msg);
    };

    KinshipSpectrum spectrum;
    if (opts.identity_kinship) {
        spectrum = KinshipSpectrum::identity(X.rows());
    } else if (opts.spectrum) {
        spectrum = *opts.spectrum;
    } else {
        log("computing kinship and its eigendecomposition");
        spectrum = eigendecompose(compute_rrm(X));
    }

    PipelineResult result;
    result.null_fit = fit_null(spectrum, Y);
    log("null model: delta = " + format_double(result.null_fit.delta) +
        ", sigma_g2 = " + format_double(result.null_fit.sigma_g2));
    const RotatedData data = rotate(spectrum, result.null_fit, X, Y);

    result.graph = build_graph(Y, opts.rho);
    log("trait graph: " + std::to_string(result.graph.edges.size()) + " edges");
    const auto H = FusionOperator::from_graph(result.graph, opts.gamma);
    const double s2 = result.null_fit.sigma_g2;

    if (opts.lambda) {
        result.lambda = *opts.lambda;
        result.beta = solve(data, s2, result.lambda, H, opts.solver).beta;
    } else if (opts.snum) {
        auto [beta, tuning] = select_by_snum(data, s2, H, *opts.snum, opts.solver);
        result.beta = std::move(beta);
        result.tuning = std::move(tuning);
        result.lambda = result.tuning.lambda_star;
        if (result.tuning.warning) {
            log("warning: selected count " + format_double(result.tuning.snum_achieved.value_or(0.0)) +
                " is not within 10% of the target");
        }
    } else {
        log("cross-validating lambda");
        result.tuning = cross_validate(data, s2, H, opts.folds, opts.solver);
        result.lambda = result.tuning.lambda_star;
        result.ran_cv = true;
        result.beta = solve(data, s2, result.lambda, H, opts.solver).beta;
    }
    log("lambda = " + format_double(result.lambda));
    return result;
}

}  // namespace sglmm
