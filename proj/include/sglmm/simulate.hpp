#pragma once

// Synthetic multi-trait data with population structure:
//   1. genotypes drawn around per-population centroids,
//   2. a block-structured sparse effect matrix (trait clusters sharing SNPs),
//   3. phenotypes with noise, population confounding and shared-signal
//      trait covariance.

#include "sglmm/common.hpp"
#include "sglmm/io.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace sglmm {

struct SimulationParams {
    Index n = 1000;              // samples
    Index j = 5000;              // SNPs
    Index k = 50;                // traits
    double d_active = 0.10;      // fraction of active SNPs
    Index g = 5;                 // subpopulations
    Index g_num = 3;             // trait clusters
    double sigma_s2 = 0.005;     // within-population genotype variance
    double sigma_t2 = 100.0;     // population confounding on traits
    double sigma_m2 = 0.001;     // shared-signal trait covariance
    double sigma_e2 = 50.0;      // noise
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || j < 1 || k < 1) throw ConfigError("n, j and k must be positive");
        if (!(d_active > 0.0 && d_active <= 1.0)) throw ConfigError("d_active must lie in (0, 1]");
        if (g < 1 || g_num < 1) throw ConfigError("g and g_num must be at least 1");
        if (g_num > k) throw ConfigError("g_num cannot exceed the number of traits");
        if (!(sigma_s2 > 0.0 && sigma_t2 > 0.0 && sigma_m2 > 0.0 && sigma_e2 > 0.0)) {
            throw ConfigError("all variances must be positive");
        }
    }
};

struct GenotypeDraw {
    Matrix X;                      // n x j
    Matrix centroids;              // g x j
    std::vector<Index> population; // per sample
};

struct EffectDraw {
    Matrix beta;                   // j x k, rows and columns permuted
    Matrix beta_ordered;           // j x k before permutation (clusters contiguous)
    std::vector<Index> cluster_assignment;  // per (permuted) trait column
    std::vector<Index> row_perm;   // ordered row r lands at beta row row_perm[r]
    std::vector<Index> col_perm;   // ordered column c lands at beta column col_perm[c]
    Index shared_snps = 0;         // size of the set shared by clusters 0 and 1
};

struct SimulatedDataset {
    Matrix X;
    Matrix Y;
    Matrix beta_true;
    Matrix centroids;
    std::vector<Index> population;
    std::vector<Index> cluster_assignment;
    std::vector<Index> row_perm;
    std::vector<Index> col_perm;
};

using SimulationRng = std::mt19937_64;

namespace detail {

inline double standard_normal(SimulationRng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline Matrix normal_matrix(Index rows, Index cols, SimulationRng& rng) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = standard_normal(rng);
    }
    return m;
}

// Sizes of `parts` contiguous groups covering `total`, remainder to the first.
inline std::vector<Index> even_split(Index total, Index parts) {
    std::vector<Index> sizes(static_cast<std::size_t>(parts), total / parts);
    for (Index i = 0; i < total % parts; ++i) ++sizes[static_cast<std::size_t>(i)];
    return sizes;
}

inline std::vector<Index> random_permutation(Index size, SimulationRng& rng) {
    std::vector<Index> perm(static_cast<std::size_t>(size));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

}  // namespace detail

// Centroids iid N(0, 1) per coordinate; sample i belongs to population i % g
// and is drawn from N(c_pop, sigma_s^2 I).
inline GenotypeDraw generate_genotypes(const SimulationParams& p, SimulationRng& rng) {
    p.validate();
    GenotypeDraw out;
    out.centroids = detail::normal_matrix(p.g, p.j, rng);
    out.population.resize(static_cast<std::size_t>(p.n));
    out.X.resize(p.n, p.j);
    const double sd = std::sqrt(p.sigma_s2);
    for (Index i = 0; i < p.n; ++i) {
        const Index pop = i % p.g;
        out.population[static_cast<std::size_t>(i)] = pop;
        for (Index s = 0; s < p.j; ++s) {
            out.X(i, s) = out.centroids(pop, s) + sd * detail::standard_normal(rng);
        }
    }
    return out;
}

// Active SNP count is round(d_active * j). With two or more clusters, a set
// of round(10% of a cluster's share) SNPs is active in both of the first two
// clusters; the rest is split evenly into disjoint per-cluster sets. Effect
// values are drawn once per (SNP, cluster) from N(0, 1) and repeated across
// the cluster's traits. Rows and columns are then randomly permuted.
inline EffectDraw generate_effects(const SimulationParams& p, SimulationRng& rng) {
    p.validate();
    const Index active = static_cast<Index>(std::llround(p.d_active * static_cast<double>(p.j)));
    if (active < p.g_num) {
        throw ConfigError("d_active * j = " + std::to_string(active) +
                          " active SNPs cannot cover " + std::to_string(p.g_num) + " clusters");
    }
    Index shared = 0;
    if (p.g_num >= 2) {
        shared = std::max<Index>(
            1, static_cast<Index>(std::llround(0.1 * static_cast<double>(active) /
                                               static_cast<double>(p.g_num))));
        if (active - shared < p.g_num) shared = 0;
    }
    const auto snp_sizes = detail::even_split(active - shared, p.g_num);
    const auto trait_sizes = detail::even_split(p.k, p.g_num);

    EffectDraw out;
    out.shared_snps = shared;
    out.beta_ordered = Matrix::Zero(p.j, p.k);
    std::vector<Index> ordered_cluster(static_cast<std::size_t>(p.k));
    std::vector<Index> trait_start(static_cast<std::size_t>(p.g_num) + 1, 0);
    for (Index c = 0; c < p.g_num; ++c) {
        trait_start[static_cast<std::size_t>(c) + 1] =
            trait_start[static_cast<std::size_t>(c)] + trait_sizes[static_cast<std::size_t>(c)];
        for (Index t = trait_start[static_cast<std::size_t>(c)];
             t < trait_start[static_cast<std::size_t>(c) + 1]; ++t) {
            ordered_cluster[static_cast<std::size_t>(t)] = c;
        }
    }
    auto fill = [&](Index row, Index cluster) {
        const double value = detail::standard_normal(rng);
        for (Index t = trait_start[static_cast<std::size_t>(cluster)];
             t < trait_start[static_cast<std::size_t>(cluster) + 1]; ++t) {
            out.beta_ordered(row, t) = value;
        }
    };
    Index row = 0;
    for (Index c = 0; c < p.g_num; ++c) {
        for (Index s = 0; s < snp_sizes[static_cast<std::size_t>(c)]; ++s, ++row) fill(row, c);
    }
    for (Index s = 0; s < shared; ++s, ++row) {
        fill(row, 0);
        fill(row, 1);
    }

    out.row_perm = detail::random_permutation(p.j, rng);
    out.col_perm = detail::random_permutation(p.k, rng);
    out.beta = Matrix::Zero(p.j, p.k);
    out.cluster_assignment.assign(static_cast<std::size_t>(p.k), 0);
    for (Index c = 0; c < p.k; ++c) {
        const Index dst_c = out.col_perm[static_cast<std::size_t>(c)];
        out.cluster_assignment[static_cast<std::size_t>(dst_c)] = ordered_cluster[static_cast<std::size_t>(c)];
        for (Index r = 0; r < p.j; ++r) {
            out.beta(out.row_perm[static_cast<std::size_t>(r)], dst_c) = out.beta_ordered(r, c);
        }
    }
    return out;
}

// r = X beta + eps;  t_i = r_i + sigma_t C z_i  (so t_i ~ N(r_i, sigma_t^2 C C^T));
// y^i = t^i + sigma_m beta^T w_i  (so y^i ~ N(t^i, sigma_m^2 beta^T beta));
// then every trait is standardized.
inline Matrix generate_phenotypes(const SimulationParams& p, const Matrix& X, const Matrix& beta,
                                  const Matrix& centroids, const std::vector<Index>& population,
                                  SimulationRng& rng) {
    p.validate();
    if (X.cols() != beta.rows() || centroids.cols() != X.cols() ||
        static_cast<Index>(population.size()) != X.rows()) {
        throw InvalidInputError("simulation inputs have inconsistent shapes");
    }
    const Index n = X.rows();
    const Index k = beta.cols();
    Matrix Y = X * beta + std::sqrt(p.sigma_e2) * detail::normal_matrix(n, k, rng);

    const Matrix Z = detail::normal_matrix(X.cols(), k, rng);
    const Matrix pop_offsets = centroids * Z;  // g x k, C z_i is constant within a population
    const double sd_t = std::sqrt(p.sigma_t2);
    for (Index i = 0; i < n; ++i) {
        Y.row(i) += sd_t * pop_offsets.row(population[static_cast<std::size_t>(i)]);
    }

    const Matrix W = detail::normal_matrix(n, X.cols(), rng);
    Y.noalias() += std::sqrt(p.sigma_m2) * (W * beta);
    return standardize_columns(std::move(Y));
}

inline SimulatedDataset simulate(const SimulationParams& p) {
    p.validate();
    SimulationRng rng(p.seed);
    auto geno = generate_genotypes(p, rng);
    auto effects = generate_effects(p, rng);
    SimulatedDataset ds;
    ds.Y = generate_phenotypes(p, geno.X, effects.beta, geno.centroids, geno.population, rng);
    ds.X = std::move(geno.X);
    ds.centroids = std::move(geno.centroids);
    ds.population = std::move(geno.population);
    ds.beta_true = std::move(effects.beta);
    ds.cluster_assignment = std::move(effects.cluster_assignment);
    ds.row_perm = std::move(effects.row_perm);
    ds.col_perm = std::move(effects.col_perm);
    return ds;
}

}  // namespace sglmm
