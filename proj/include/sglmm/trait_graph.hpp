#pragma once

// Trait-relatedness graph from thresholded pairwise Pearson correlation.

#include "sglmm/common.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

namespace sglmm {

inline constexpr double kDefaultCorrelationThreshold = 0.618;

struct Edge {
    Index m = 0;
    Index l = 0;
    double r = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct TraitGraph {
    Index k = 0;
    std::vector<Edge> edges;  // m < l, lexicographic order
    // Traits with zero variance; they never get edges.
    std::vector<Index> constant_nodes;
};

// Pearson correlation of every column pair; 0 where either column is constant.
inline Matrix pearson_matrix(const Matrix& Y) {
    const Index k = Y.cols();
    const Matrix centered = Y.rowwise() - Y.colwise().mean();
    const Vector norms = centered.colwise().norm();
    Matrix R = Matrix::Identity(k, k);
    for (Index m = 0; m < k; ++m) {
        for (Index l = m + 1; l < k; ++l) {
            double r = 0.0;
            if (norms(m) > 0.0 && norms(l) > 0.0) {
                r = centered.col(m).dot(centered.col(l)) / (norms(m) * norms(l));
                r = std::clamp(r, -1.0, 1.0);
            }
            R(m, l) = r;
            R(l, m) = r;
        }
    }
    return R;
}

// Links traits m < l when |r_ml| > rho. Correlations are taken on the
// unrotated (standardized) phenotypes.
inline TraitGraph build_graph(const Matrix& Y, double rho = kDefaultCorrelationThreshold) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw InvalidInputError("correlation threshold must lie in [0, 1)");
    }
    TraitGraph graph;
    graph.k = Y.cols();
    if (graph.k < 2) return graph;

    const Vector spread = (Y.rowwise() - Y.colwise().mean()).colwise().norm();
    for (Index t = 0; t < graph.k; ++t) {
        if (!(spread(t) > 1e-12 * std::sqrt(static_cast<double>(Y.rows())))) {
            graph.constant_nodes.push_back(t);
        }
    }
    auto is_constant = [&](Index t) {
        return std::find(graph.constant_nodes.begin(), graph.constant_nodes.end(), t) !=
               graph.constant_nodes.end();
    };
    const Matrix R = pearson_matrix(Y);
    for (Index m = 0; m < graph.k; ++m) {
        if (is_constant(m)) continue;
        for (Index l = m + 1; l < graph.k; ++l) {
            if (is_constant(l)) continue;
            if (std::abs(R(m, l)) > rho) graph.edges.push_back({m, l, R(m, l)});
        }
    }
    return graph;
}

// Tab-separated "m<TAB>l<TAB>r", one edge per line, zero-based node indices.
inline void write_graph(const std::filesystem::path& path, const TraitGraph& graph) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    for (const auto& e : graph.edges) {
        out << e.m << '\t' << e.l << '\t' << format_double(e.r) << '\n';
    }
}

inline TraitGraph read_graph(const std::filesystem::path& path, Index k) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path.string() + "'");
    TraitGraph graph;
    graph.k = k;
    Index m = 0, l = 0;
    double r = 0.0;
    while (in >> m >> l >> r) {
        if (m < 0 || l < 0 || m >= k || l >= k || m == l) {
            throw InvalidInputError(path.string() + ": edge (" + std::to_string(m) + ", " +
                                    std::to_string(l) + ") out of range");
        }
        if (m > l) std::swap(m, l);
        graph.edges.push_back({m, l, r});
    }
    if (!in.eof()) throw ParseError(path.string() + ": malformed edge line");
    std::sort(graph.edges.begin(), graph.edges.end(), [](const Edge& a, const Edge& b) {
        return a.m != b.m ? a.m < b.m : a.l < b.l;
    });
    for (std::size_t i = 1; i < graph.edges.size(); ++i) {
        if (graph.edges[i].m == graph.edges[i - 1].m && graph.edges[i].l == graph.edges[i - 1].l) {
            throw InvalidInputError(path.string() + ": duplicate edge");
        }
    }
    return graph;
}

}  // namespace sglmm
