#pragma once

// Regularization selection: K-fold cross-validation over a lambda grid, and
// bisection on lambda toward a target number of selected SNPs per trait.

#include "sglmm/common.hpp"
#include "sglmm/solver.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <utility>
#include <vector>

namespace sglmm {

inline constexpr int kDefaultFolds = 5;
inline constexpr int kCvGridPoints = 10;
inline constexpr double kCvGridSpan = 1e-3;       // smallest / largest lambda
inline constexpr double kSnumBracketSpan = 1e-6;
inline constexpr int kSnumMaxSteps = 30;
inline constexpr double kSnumTolerance = 0.10;    // accept counts within 10% of target

struct CvPoint {
    double lambda = 0.0;
    double mean_error = 0.0;
};

struct TuningResult {
    double lambda_star = 0.0;
    std::vector<CvPoint> cv_table;
    std::optional<double> snum_achieved;  // mean per-trait nonzero count
    bool warning = false;                 // target count was not reached
    std::vector<std::pair<double, double>> snum_trace;  // (lambda, mean count)
};

// Rows i with i % folds == fold.
inline std::vector<Index> fold_rows(Index n, int folds, int fold) {
    std::vector<Index> rows;
    for (Index i = fold; i < n; i += folds) rows.push_back(i);
    return rows;
}

// Log-spaced, from lambda_max down to lambda_max * kCvGridSpan.
inline std::vector<double> cv_lambda_grid(double lmax) {
    std::vector<double> grid(kCvGridPoints);
    for (int i = 0; i < kCvGridPoints; ++i) {
        grid[static_cast<std::size_t>(i)] =
            lmax * std::pow(kCvGridSpan, static_cast<double>(i) / (kCvGridPoints - 1));
    }
    return grid;
}

namespace detail {

inline Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

}  // namespace detail

// Validation error is ||Y_val - X_val beta||_F^2. Each fold walks the grid
// from the largest lambda down, warm-starting from the previous solution.
// The selected lambda minimizes the mean error; ties go to the larger lambda.
inline TuningResult cross_validate(const RotatedData& data, double sigma_g2, const FusionOperator& H,
                                   int folds = kDefaultFolds, const SolverOptions& opts = {}) {
    const Index n = data.X.rows();
    if (folds < 2 || n < folds) {
        throw ConfigError("cross-validation needs 2 <= folds <= n (n = " + std::to_string(n) +
                          ", folds = " + std::to_string(folds) + ")");
    }
    const auto grid = cv_lambda_grid(lambda_max(data, sigma_g2));
    std::vector<double> total(grid.size(), 0.0);

    for (int f = 0; f < folds; ++f) {
        const auto val_rows = fold_rows(n, folds, f);
        std::vector<Index> train_rows;
        for (Index i = 0; i < n; ++i) {
            if (i % folds != f) train_rows.push_back(i);
        }
        if (val_rows.empty() || train_rows.empty()) throw ConfigError("empty cross-validation fold");
        const RotatedData train{detail::take_rows(data.X, train_rows), detail::take_rows(data.Y, train_rows)};
        const Matrix X_val = detail::take_rows(data.X, val_rows);
        const Matrix Y_val = detail::take_rows(data.Y, val_rows);

        std::optional<Matrix> warm;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            auto fit = solve(train, sigma_g2, grid[g], H, opts, warm);
            total[g] += (Y_val - X_val * fit.beta).squaredNorm();
            warm = std::move(fit.beta);
        }
    }

    TuningResult result;
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double mean = total[g] / folds;
        result.cv_table.push_back({grid[g], mean});
        if (mean < result.cv_table[best].mean_error * (1.0 - 1e-12)) best = g;
    }
    result.lambda_star = grid[best];
    return result;
}

inline double mean_nonzero_per_trait(const Matrix& beta) {
    if (beta.cols() == 0) return 0.0;
    return static_cast<double>((beta.array() != 0.0).count()) / static_cast<double>(beta.cols());
}

// Bisection on log lambda in [lambda_max * 1e-6, lambda_max] until the mean
// per-trait nonzero count is within 10% of `target` (at most 30 steps).
// Returns the evaluated solution whose count is closest to the target.
inline std::pair<Matrix, TuningResult> select_by_snum(const RotatedData& data, double sigma_g2,
                                                      const FusionOperator& H, int target,
                                                      const SolverOptions& opts = {}) {
    const Index j = data.X.cols();
    if (target < 1 || target > j) {
        throw ConfigError("snum must lie in [1, " + std::to_string(j) + "]");
    }
    const double lmax = lambda_max(data, sigma_g2);
    double lo = std::log(lmax * kSnumBracketSpan);
    double hi = std::log(lmax);
    const double goal = static_cast<double>(target);

    TuningResult result;
    Matrix best_beta = Matrix::Zero(j, data.Y.cols());
    double best_gap = std::numeric_limits<double>::infinity();
    std::optional<Matrix> warm;
    for (int step = 0; step < kSnumMaxSteps; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double lambda = std::exp(mid);
        auto fit = solve(data, sigma_g2, lambda, H, opts, warm);
        const double count = mean_nonzero_per_trait(fit.beta);
        result.snum_trace.emplace_back(lambda, count);
        const double gap = std::abs(count - goal);
        if (gap < best_gap) {
            best_gap = gap;
            best_beta = fit.beta;
            result.lambda_star = lambda;
            result.snum_achieved = count;
        }
        if (gap <= kSnumTolerance * goal) break;
        if (count > goal) {
            lo = mid;  // too dense: raise lambda
        } else {
            hi = mid;
        }
        warm = std::move(fit.beta);
    }
    result.warning = !(best_gap <= kSnumTolerance * goal);
    return {std::move(best_beta), std::move(result)};
}

// "lambda,mean_error" rows.
inline void write_cv_table(const std::filesystem::path& path, const TuningResult& result) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    out << "lambda,mean_error\n";
    for (const auto& p : result.cv_table) {
        out << format_double(p.lambda) << ',' << format_double(p.mean_error) << '\n';
    }
}

}  // namespace sglmm
