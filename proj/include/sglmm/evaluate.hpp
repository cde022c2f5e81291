#pragma once

// Ranking metrics of estimated effects against ground-truth support.
// An entry (SNP, trait) is a positive when its true effect is nonzero; the
// score is |beta_hat|. Tied scores form a single threshold step.

#include "sglmm/common.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace sglmm {

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr)
    double auroc = 0.0;
};

using PrCurve = std::vector<std::pair<double, double>>;  // (recall, precision)

namespace detail {

struct RankedEntries {
    std::vector<double> score;     // descending
    std::vector<bool> positive;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

inline RankedEntries rank_entries(const Matrix& beta_hat, const Matrix& beta_true) {
    if (beta_hat.rows() != beta_true.rows() || beta_hat.cols() != beta_true.cols()) {
        throw InvalidInputError("estimated and true effect matrices differ in shape");
    }
    const auto size = static_cast<std::size_t>(beta_hat.size());
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double* hat = beta_hat.data();
    std::stable_sort(order.begin(), order.end(), [hat](std::size_t a, std::size_t b) {
        return std::abs(hat[a]) > std::abs(hat[b]);
    });
    RankedEntries out;
    out.score.reserve(size);
    out.positive.reserve(size);
    for (std::size_t idx : order) {
        out.score.push_back(std::abs(hat[idx]));
        const bool pos = beta_true.data()[idx] != 0.0;
        out.positive.push_back(pos);
        pos ? ++out.positives : ++out.negatives;
    }
    if (out.positives == 0 || out.negatives == 0) {
        throw InvalidInputError("ground truth must contain both zero and nonzero entries");
    }
    return out;
}

// Calls visit(tp, fp) after each group of tied scores.
template <typename Visit>
void sweep(const RankedEntries& r, Visit&& visit) {
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < r.score.size()) {
        std::size_t end = i;
        while (end < r.score.size() && r.score[end] == r.score[i]) {
            r.positive[end] ? ++tp : ++fp;
            ++end;
        }
        visit(tp, fp);
        i = end;
    }
}

}  // namespace detail

inline RocCurve roc(const Matrix& beta_hat, const Matrix& beta_true) {
    const auto ranked = detail::rank_entries(beta_hat, beta_true);
    const double P = static_cast<double>(ranked.positives);
    const double N = static_cast<double>(ranked.negatives);
    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    detail::sweep(ranked, [&](std::size_t tp, std::size_t fp) {
        curve.points.emplace_back(static_cast<double>(fp) / N, static_cast<double>(tp) / P);
    });
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& [x0, y0] = curve.points[i - 1];
        const auto& [x1, y1] = curve.points[i];
        curve.auroc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    return curve;
}

inline PrCurve precision_recall(const Matrix& beta_hat, const Matrix& beta_true) {
    const auto ranked = detail::rank_entries(beta_hat, beta_true);
    const double P = static_cast<double>(ranked.positives);
    PrCurve curve;
    detail::sweep(ranked, [&](std::size_t tp, std::size_t fp) {
        curve.emplace_back(static_cast<double>(tp) / P,
                           static_cast<double>(tp) / static_cast<double>(tp + fp));
    });
    return curve;
}

// Step-wise area under the PR curve: sum of (delta recall) * precision.
inline double average_precision(const PrCurve& curve) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& [recall, precision] : curve) {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

// Column cosine similarity of beta_hat; zero columns give 0 off the diagonal.
inline Matrix relatedness_matrix(const Matrix& beta_hat) {
    const Index k = beta_hat.cols();
    const Vector norms = beta_hat.colwise().norm();
    const Matrix gram = beta_hat.transpose() * beta_hat;
    Matrix out = Matrix::Zero(k, k);
    for (Index m = 0; m < k; ++m) {
        for (Index l = 0; l < k; ++l) {
            if (norms(m) > 0.0 && norms(l) > 0.0) out(m, l) = gram(m, l) / (norms(m) * norms(l));
        }
    }
    return out;
}

struct BlockContrast {
    double within = 0.0;
    double between = 0.0;
};

// Mean off-diagonal similarity for trait pairs in the same cluster vs
// pairs in different clusters.
inline BlockContrast block_contrast(const Matrix& similarity, const std::vector<Index>& cluster) {
    const Index k = similarity.rows();
    if (static_cast<Index>(cluster.size()) != k) {
        throw InvalidInputError("cluster assignment length must equal k");
    }
    double within = 0.0, between = 0.0;
    std::size_t nw = 0, nb = 0;
    for (Index m = 0; m < k; ++m) {
        for (Index l = m + 1; l < k; ++l) {
            if (cluster[static_cast<std::size_t>(m)] == cluster[static_cast<std::size_t>(l)]) {
                within += similarity(m, l);
                ++nw;
            } else {
                between += similarity(m, l);
                ++nb;
            }
        }
    }
    return {nw ? within / static_cast<double>(nw) : 0.0, nb ? between / static_cast<double>(nb) : 0.0};
}

inline void write_curve_csv(const std::filesystem::path& path, const char* header,
                            const std::vector<std::pair<double, double>>& points) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    out << header << '\n';
    for (const auto& [a, b] : points) out << format_double(a) << ',' << format_double(b) << '\n';
}

struct AurocRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::string setting;
    double auroc = 0.0;
};

// Summary table for method comparisons across seeds and parameter settings.
inline void write_auroc_table(const std::filesystem::path& path, const std::vector<AurocRecord>& rows) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    out << "method,seed,setting,auroc\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.seed << ',' << r.setting << ',' << format_double(r.auroc) << '\n';
    }
}

}  // namespace sglmm
