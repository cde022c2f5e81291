#pragma once

// Null variance-component model and the whitening rotation that reduces the
// mixed model to an ordinary (isotropic) regression.

#include "sglmm/common.hpp"
#include "sglmm/io.hpp"
#include "sglmm/kinship.hpp"

#include <limits>
#include <numbers>
#include <vector>

namespace sglmm {

inline constexpr double kDeltaMin = 1e-5;
inline constexpr double kDeltaMax = 1e5;
inline constexpr int kDeltaGridPoints = 100;
inline constexpr double kGoldenRelativeWidth = 1e-4;

struct NullFit {
    double delta = 1.0;     // sigma_e^2 / sigma_g^2
    double sigma_g2 = 1.0;
    double loglik = 0.0;
};

struct NullLoglik {
    double loglik = 0.0;
    double sigma_g2 = 0.0;
};

struct RotatedData {
    Matrix X;  // n x j
    Matrix Y;  // n x k
};

// Sufficient statistics of the null likelihood: the eigenvalues of K and the
// per-eigenvector energy of the projected phenotypes, sum_i (U^T y_i)_s^2.
class NullLikelihood {
public:
    NullLikelihood(const KinshipSpectrum& spectrum, const Matrix& Y)
        : d_(spectrum.d), traits_(Y.cols()) {
        if (spectrum.U.rows() != Y.rows()) {
            throw InvalidInputError("kinship and phenotype sample counts differ");
        }
        if (Y.cols() == 0) {
            throw InvalidInputError("null model needs at least one trait");
        }
        const Matrix projected = spectrum.U.transpose() * Y;
        energy_ = projected.rowwise().squaredNorm();
    }

    // Profile log-likelihood at delta, with sigma_g^2 at its closed-form
    // maximizer, summed over the independent trait models.
    NullLoglik operator()(double delta) const {
        const double n = static_cast<double>(d_.size());
        const double k = static_cast<double>(traits_);
        double weighted = 0.0;
        double logdet = 0.0;
        for (Index s = 0; s < d_.size(); ++s) {
            const double v = d_(s) + delta;
            if (!(v > 0.0)) {
                throw NumericError("d_s + delta must be positive (got " + format_double(v) + ")");
            }
            weighted += energy_(s) / v;
            logdet += std::log(v);
        }
        NullLoglik out;
        out.sigma_g2 = weighted / (n * k);
        out.loglik = -0.5 * (n * k * std::log(2.0 * std::numbers::pi * out.sigma_g2) +
                             k * logdet + n * k);
        return out;
    }

    Index samples() const { return d_.size(); }
    Index traits() const { return traits_; }

private:
    Vector d_;
    Vector energy_;
    Index traits_;
};

inline NullLoglik null_loglik(const KinshipSpectrum& spectrum, const Matrix& Y, double delta) {
    if (!(delta > 0.0)) throw InvalidInputError("delta must be positive");
    return NullLikelihood(spectrum, Y)(delta);
}

// Full (non-profiled) null log-likelihood at an arbitrary (delta, sigma_g^2).
inline double null_loglik_full(const KinshipSpectrum& spectrum, const Matrix& Y, double delta,
                               double sigma_g2) {
    const Matrix projected = spectrum.U.transpose() * Y;
    const double k = static_cast<double>(Y.cols());
    double total = 0.0;
    for (Index s = 0; s < spectrum.d.size(); ++s) {
        const double v = sigma_g2 * (spectrum.d(s) + delta);
        total += -0.5 * (k * std::log(2.0 * std::numbers::pi * v) +
                         projected.row(s).squaredNorm() / v);
    }
    return total;
}

// The log-uniform search grid over [kDeltaMin, kDeltaMax].
inline std::vector<double> delta_grid() {
    std::vector<double> grid(kDeltaGridPoints);
    const double lo = std::log10(kDeltaMin);
    const double hi = std::log10(kDeltaMax);
    for (int i = 0; i < kDeltaGridPoints; ++i) {
        grid[static_cast<std::size_t>(i)] =
            std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / (kDeltaGridPoints - 1));
    }
    grid.front() = kDeltaMin;
    grid.back() = kDeltaMax;
    return grid;
}

namespace detail {

// A candidate only displaces the incumbent when it is better by more than
// rounding noise; this keeps flat ridges resolved toward the smaller delta.
inline bool strictly_better(double candidate, double incumbent) {
    if (!std::isfinite(candidate)) return false;
    if (!std::isfinite(incumbent)) return true;
    return candidate > incumbent + 1e-10 * std::max(1.0, std::abs(incumbent));
}

}  // namespace detail

// Maximizes the shared null log-likelihood over delta: grid search followed by
// golden-section refinement (in log delta) of the bracket around the best grid
// point.
inline NullFit fit_null(const KinshipSpectrum& spectrum, const Matrix& Y) {
    const NullLikelihood lik(spectrum, Y);
    const auto grid = delta_grid();

    std::size_t best = grid.size();
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ll = lik(grid[i]).loglik;
        if (detail::strictly_better(ll, best_ll)) {
            best = i;
            best_ll = ll;
        }
    }
    if (best == grid.size()) {
        throw NumericError("null model log-likelihood is non-finite over the whole delta grid");
    }

    double best_delta = grid[best];
    double a = std::log(grid[best == 0 ? 0 : best - 1]);
    double b = std::log(grid[best + 1 == grid.size() ? best : best + 1]);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    auto eval = [&](double log_delta) { return lik(std::exp(log_delta)).loglik; };
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = eval(c);
    double fd = eval(d);
    const double stop = std::log1p(kGoldenRelativeWidth);
    while (b - a > stop) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d);
        }
    }
    for (double cand : {a, c, d, b}) {
        const double ll = eval(cand);
        if (detail::strictly_better(ll, best_ll)) {
            best_ll = ll;
            best_delta = std::exp(cand);
        }
    }
    best_delta = std::clamp(best_delta, kDeltaMin, kDeltaMax);

    const auto at = lik(best_delta);
    return {best_delta, at.sigma_g2, at.loglik};
}

// R = (diag(d) + delta I)^{-1/2} U^T.
inline Matrix whitening_matrix(const KinshipSpectrum& spectrum, double delta) {
    const Vector scale = (spectrum.d.array() + delta).rsqrt().matrix();
    return scale.asDiagonal() * spectrum.U.transpose();
}

inline RotatedData rotate(const KinshipSpectrum& spectrum, const NullFit& fit, const Matrix& X,
                          const Matrix& Y) {
    const Index n = spectrum.size();
    if (X.rows() != n || Y.rows() != n) {
        throw InvalidInputError("rotation inputs must have one row per sample");
    }
    if ((spectrum.d.array() + fit.delta).minCoeff() <= 0.0) {
        throw NumericError("d_s + delta must be positive");
    }
    const Vector scale = (spectrum.d.array() + fit.delta).rsqrt().matrix();
    RotatedData out;
    out.X.noalias() = spectrum.U.transpose() * X;
    out.X = scale.asDiagonal() * out.X;
    out.Y.noalias() = spectrum.U.transpose() * Y;
    out.Y = scale.asDiagonal() * out.Y;
    return out;
}

inline RotatedData rotate(const KinshipSpectrum& spectrum, const NullFit& fit,
                          const GenotypeMatrix& X, const PhenotypeMatrix& Y) {
    if (X.has_missing() || Y.has_missing()) {
        throw InvalidInputError("rotation requires complete genotype and phenotype data");
    }
    return rotate(spectrum, fit, X.values, Y.values);
}

}  // namespace sglmm
