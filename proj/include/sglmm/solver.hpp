#pragma once

// Graph-guided fused lasso on whitened data:
//
//   F(beta) = (1/sigma_g^2) ||Y - X beta||_F^2 + lambda ||beta||_1
//             + sum_e sum_i |(beta H^T)_{i,e}|
//
// solved by smoothing proximal gradient. The fusion term is replaced by its
// Nesterov-smoothed surrogate (max over the dual box |alpha| <= 1 with a
// mu/2 ||alpha||^2 prox term), the l1 term is handled exactly by soft
// thresholding, and steps are accelerated with a monotone momentum restart.

#include "sglmm/common.hpp"
#include "sglmm/mixed_model.hpp"
#include "sglmm/trait_graph.hpp"

#include <Eigen/Eigenvalues>

#include <limits>
#include <deque>
#include <optional>
#include <ostream>
#include <vector>

namespace sglmm {

// Fusion operator H (|E| x k). Row e for edge (m, l):
//   H[e, m] = gamma |r_ml|,   H[e, l] = -gamma |r_ml| sign(r_ml).
class FusionOperator {
public:
    FusionOperator() = default;

    FusionOperator(Matrix H, Index traits) : H_(std::move(H)) {
        if (H_.rows() == 0) H_.resize(0, traits);
        if (H_.cols() != traits) throw InvalidInputError("fusion operator width must equal k");
        norm_sq_ = compute_norm_sq();
    }

    static FusionOperator from_graph(const TraitGraph& graph, double gamma) {
        if (!(gamma >= 0.0)) throw InvalidInputError("gamma must be non-negative");
        std::vector<Edge> kept;
        if (gamma > 0.0) {
            for (const auto& e : graph.edges) {
                if (e.r != 0.0) kept.push_back(e);
            }
        }
        Matrix H = Matrix::Zero(static_cast<Index>(kept.size()), graph.k);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const auto& e = kept[i];
            const double w = gamma * std::abs(e.r);
            const auto row = static_cast<Index>(i);
            H(row, e.m) = w;
            H(row, e.l) = e.r > 0.0 ? -w : w;
        }
        return FusionOperator(std::move(H), graph.k);
    }

    static FusionOperator none(Index traits) { return FusionOperator(Matrix(0, traits), traits); }

    const Matrix& matrix() const { return H_; }
    Index edges() const { return H_.rows(); }
    Index traits() const { return H_.cols(); }
    bool empty() const { return H_.rows() == 0; }

    // ||H||_2^2, the largest eigenvalue of H^T H.
    double norm_sq() const { return norm_sq_; }

private:
    double compute_norm_sq() const {
        if (H_.rows() == 0) return 0.0;
        const Matrix gram = H_.transpose() * H_;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
        return std::max(0.0, es.eigenvalues().maxCoeff());
    }

    Matrix H_{0, 0};
    double norm_sq_ = 0.0;
};

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline Matrix soft_threshold(const Matrix& v, double t) {
    if (t < 0.0) throw InvalidInputError("soft threshold must be non-negative");
    return v.unaryExpr([t](double x) { return soft_threshold(x, t); });
}

// Exact fusion term sum_e sum_i |(beta H^T)_{i,e}|.
inline double fusion_value(const Matrix& beta, const FusionOperator& H) {
    if (H.empty()) return 0.0;
    if (beta.cols() != H.traits()) throw InvalidInputError("beta and H disagree on k");
    return (beta * H.matrix().transpose()).cwiseAbs().sum();
}

inline double penalty_value(const Matrix& beta, double lambda, const FusionOperator& H) {
    return lambda * beta.cwiseAbs().sum() + fusion_value(beta, H);
}

struct SmoothedFusion {
    double value = 0.0;
    Matrix grad;  // j x k
};

// Smoothed fusion value and gradient. With A = beta H^T and
// alpha* = clip(A / mu, -1, 1):
//   value = <alpha*, A> - (mu/2) ||alpha*||^2,  grad = alpha* H.
inline SmoothedFusion smoothed_fusion(const Matrix& beta, const FusionOperator& H, double mu) {
    if (!(mu > 0.0)) throw InvalidInputError("smoothing parameter must be positive");
    SmoothedFusion out;
    if (H.empty()) {
        out.grad = Matrix::Zero(beta.rows(), beta.cols());
        return out;
    }
    const Matrix A = beta * H.matrix().transpose();
    const Matrix alpha = (A / mu).cwiseMax(-1.0).cwiseMin(1.0);
    out.value = alpha.cwiseProduct(A).sum() - 0.5 * mu * alpha.squaredNorm();
    out.grad = alpha * H.matrix();
    return out;
}

inline double objective(const RotatedData& data, double sigma_g2, double lambda,
                        const FusionOperator& H, const Matrix& beta) {
    return (data.Y - data.X * beta).squaredNorm() / sigma_g2 + penalty_value(beta, lambda, H);
}

// Smallest lambda at which beta = 0 solves the problem with an empty graph.
inline double lambda_max(const RotatedData& data, double sigma_g2) {
    return ((2.0 / sigma_g2) * (data.X.transpose() * data.Y)).cwiseAbs().maxCoeff();
}

inline constexpr double kDefaultTargetAccuracy = 1e-4;

// mu = eps / (2 D) with D = j |E|, the dual dimension of the smoothed term.
inline double default_mu(Index snps, Index edges, double target_accuracy = kDefaultTargetAccuracy) {
    const double dim = static_cast<double>(std::max<Index>(1, snps * edges));
    return target_accuracy / (2.0 * dim);
}

struct SolverOptions {
    int max_iter = 2000;
    double tol = 1e-5;                     // relative change of F
    std::optional<double> mu;              // default_mu(j, |E|) when unset
    double target_accuracy = kDefaultTargetAccuracy;
    // Solve a short sequence of problems with mu decreasing tenfold down to
    // the target, each warm-started from the previous one.
    bool continuation = true;
    std::ostream* trace = nullptr;         // "iteration,F,nnz" rows when set
};

struct SolveResult {
    Matrix beta;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double mu = 0.0;
    double lipschitz = 0.0;
};

// Largest eigenvalue of X^T X by power iteration, inflated by 1% and capped
// by the ||X||_1 ||X||_inf bound, which always dominates ||X||_2^2.
inline double gram_spectral_bound(const Matrix& X, int steps = 100) {
    if (X.size() == 0) return 0.0;
    const double bound = X.cwiseAbs().colwise().sum().maxCoeff() *
                         X.cwiseAbs().rowwise().sum().maxCoeff();
    if (bound == 0.0) return 0.0;
    Vector v = Vector::Ones(X.cols()) / std::sqrt(static_cast<double>(X.cols()));
    double estimate = 0.0;
    for (int it = 0; it < steps; ++it) {
        Vector w = X.transpose() * (X * v);
        const double norm = w.norm();
        if (norm == 0.0) {
            // Start vector in the null space; fall back to the bound.
            return bound;
        }
        estimate = v.dot(w);
        v = w / norm;
    }
    return std::min(bound, 1.01 * estimate);
}

namespace detail {

class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

inline Index count_nonzero(const Matrix& m) {
    return static_cast<Index>((m.array() != 0.0).count());
}

// Accelerated proximal gradient on one smoothing level. Starts from `beta`,
// only accepts iterates that lower the smoothed objective and keeps the best
// exact-objective iterate seen in `best`.
// The relative change of F is measured across this many accepted iterates,
// so a single short step does not end the run.
inline constexpr int kStopWindow = 20;
inline constexpr int kStageStopWindow = 20;  // intermediate smoothing levels

struct StageRunner {
    const RotatedData& data;
    double inv_s2;
    double lambda;
    const FusionOperator& H;
    std::ostream* trace;

    struct State {
        Matrix beta;
        Matrix Xbeta;
        double F = 0.0;  // exact objective at beta
    };

    double exact(const Matrix& beta, const Matrix& Xbeta, const Matrix& betaH) const {
        double f = inv_s2 * (data.Y - Xbeta).squaredNorm() + lambda * beta.cwiseAbs().sum();
        if (!H.empty()) f += betaH.cwiseAbs().sum();
        return f;
    }

    // Huber form of the smoothed fusion term, evaluated from beta H^T.
    static double huber(const Matrix& betaH, double mu) {
        double v = 0.0;
        for (Index i = 0; i < betaH.size(); ++i) {
            const double a = std::abs(betaH.data()[i]);
            v += a <= mu ? a * a / (2.0 * mu) : a - 0.5 * mu;
        }
        return v;
    }

    // Returns true when the relative-change criterion stopped the stage.
    bool run(const State& start, State& best, double mu, double L, int max_iter, double tol,
             int window, int& iterations) const {
        const Matrix& Ht = H.matrix();
        const bool fused = !H.empty();
        Matrix beta = start.beta;
        Matrix Xbeta = start.Xbeta;
        Matrix betaH = fused ? Matrix(beta * Ht.transpose()) : Matrix();
        auto smoothed = [&](const Matrix& b, const Matrix& Xb, const Matrix& bH) {
            double f = inv_s2 * (data.Y - Xb).squaredNorm() + lambda * b.cwiseAbs().sum();
            if (fused) f += huber(bH, mu);
            return f;
        };
        double Fs = smoothed(beta, Xbeta, betaH);
        Matrix z = beta;
        Matrix Xz = Xbeta;
        Matrix zH = betaH;
        double t = 1.0;
        bool plain_step = true;
        const double step = 1.0 / L;
        // Smoothed objective of the last `window` accepted iterates.
        std::deque<double> recent{Fs};

        for (int it = 0; it < max_iter; ++it) {
            ++iterations;
            Matrix grad = (2.0 * inv_s2) * (data.X.transpose() * (Xz - data.Y));
            if (fused) {
                const Matrix alpha = (zH / mu).cwiseMax(-1.0).cwiseMin(1.0);
                grad.noalias() += alpha * Ht;
            }
            Matrix u = soft_threshold(z - step * grad, lambda * step);
            Matrix Xu = data.X * u;
            Matrix uH = fused ? Matrix(u * Ht.transpose()) : Matrix();
            const double Fs_u = smoothed(u, Xu, uH);
            if (!std::isfinite(Fs_u)) throw DivergenceError("objective became non-finite");
            const double F_u = exact(u, Xu, uH);
            if (F_u < best.F) best = {u, Xu, F_u};

            if (trace) *trace << iterations << ',' << format_double(F_u) << ',' << count_nonzero(u) << '\n';

            if (Fs_u <= Fs) {
                recent.push_back(Fs_u);
                if (static_cast<int>(recent.size()) > window + 1) recent.pop_front();
                const double change = (recent.front() - Fs_u) / std::max(std::abs(Fs_u), 1e-300);
                const bool fixed_point = plain_step && u == beta;
                const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
                const double w = (t - 1.0) / t_next;
                z = u + w * (u - beta);
                Xz = Xu + w * (Xu - Xbeta);
                if (fused) zH = uH + w * (uH - betaH);
                beta = std::move(u);
                Xbeta = std::move(Xu);
                if (fused) betaH = std::move(uH);
                Fs = Fs_u;
                t = t_next;
                plain_step = false;
                if (fixed_point) return true;
                if (static_cast<int>(recent.size()) > window && change < tol) return true;
            } else {
                // With step 1/L a momentum-free step cannot increase the
                // smoothed objective; if it does, rounding has taken over.
                if (plain_step) return true;
                z = beta;
                Xz = Xbeta;
                if (fused) zH = betaH;
                t = 1.0;
                plain_step = true;
            }
        }
        return false;
    }
};

}  // namespace detail

// Minimizes F(beta) starting from `warm_start` (zero when absent).
inline SolveResult solve(const RotatedData& data, double sigma_g2, double lambda,
                         const FusionOperator& H, const SolverOptions& opts = {},
                         const std::optional<Matrix>& warm_start = std::nullopt) {
    const Index j = data.X.cols();
    const Index k = data.Y.cols();
    if (data.X.rows() != data.Y.rows()) throw InvalidInputError("X and Y sample counts differ");
    if (H.traits() != k) throw InvalidInputError("fusion operator does not match trait count");
    if (!(sigma_g2 > 0.0)) throw InvalidInputError("sigma_g2 must be positive");
    if (!(lambda >= 0.0)) throw InvalidInputError("lambda must be non-negative");
    if (opts.max_iter < 1 || !(opts.tol > 0.0)) throw ConfigError("invalid solver options");

    const double inv_s2 = 1.0 / sigma_g2;
    const double quad_L = 2.0 * inv_s2 * gram_spectral_bound(data.X);
    const double mu_target = opts.mu.value_or(default_mu(j, H.edges(), opts.target_accuracy));
    if (!(mu_target > 0.0)) throw ConfigError("smoothing parameter must be positive");

    std::vector<double> schedule;
    if (!H.empty() && opts.continuation && quad_L > 0.0) {
        for (double mu = H.norm_sq() / quad_L; mu > mu_target; mu /= 10.0) schedule.push_back(mu);
    }
    schedule.push_back(mu_target);

    detail::StageRunner runner{data, inv_s2, lambda, H, opts.trace};
    detail::StageRunner::State state;
    if (warm_start) {
        if (warm_start->rows() != j || warm_start->cols() != k) {
            throw InvalidInputError("warm start has the wrong shape");
        }
        state.beta = *warm_start;
    } else {
        state.beta = Matrix::Zero(j, k);
    }
    state.Xbeta = data.X * state.beta;
    state.F = runner.exact(state.beta, state.Xbeta,
                           H.empty() ? Matrix() : Matrix(state.beta * H.matrix().transpose()));
    if (!std::isfinite(state.F)) throw NumericError("objective is non-finite at the start point");
    if (opts.trace) *opts.trace << "iteration,F,nnz\n";

    SolveResult result;
    // Each stage starts from the previous stage's final point; the returned
    // beta is the best exact-objective iterate over all stages.
    detail::StageRunner::State best = state;
    for (double mu : schedule) {
        double L = quad_L + (H.empty() ? 0.0 : H.norm_sq() / mu);
        if (!(L > 0.0)) L = 1.0;  // X = 0 and no graph: beta = prox(0) is immediate
        const auto start = best;
        const int window = mu == schedule.back() ? detail::kStopWindow : detail::kStageStopWindow;
        try {
            result.converged = runner.run(start, best, mu, L, opts.max_iter, opts.tol, window, result.iterations);
        } catch (const detail::DivergenceError&) {
            best = start;
            L *= 2.0;
            try {
                result.converged = runner.run(start, best, mu, L, opts.max_iter, opts.tol, window, result.iterations);
            } catch (const detail::DivergenceError&) {
                throw NumericError("proximal gradient diverged (non-finite objective)");
            }
        }
        result.mu = mu;
        result.lipschitz = L;
    }
    result.beta = std::move(best.beta);
    result.objective = best.F;
    return result;
}

}  // namespace sglmm
