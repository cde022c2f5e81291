#pragma once

// Export of simulated datasets: genotype and phenotype CSVs in the loader's
// format, the ground-truth effect matrix and a JSON manifest.

#include "sglmm/io.hpp"
#include "sglmm/simulate.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sglmm {

struct DatasetPaths {
    std::filesystem::path genotypes;   // <prefix>.csv
    std::filesystem::path phenotypes;  // <prefix>.pheno.csv
    std::filesystem::path beta_true;   // <prefix>.beta_true.csv
    std::filesystem::path manifest;    // <prefix>.manifest.json

    static DatasetPaths for_prefix(const std::filesystem::path& prefix) {
        const std::string p = prefix.string();
        return {p + ".csv", p + ".pheno.csv", p + ".beta_true.csv", p + ".manifest.json"};
    }
};

inline std::vector<std::string> numbered_ids(const char* stem, Index count) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) ids.push_back(stem + std::to_string(i));
    return ids;
}

inline nlohmann::json params_to_json(const SimulationParams& p) {
    return {{"n", p.n},
            {"j", p.j},
            {"k", p.k},
            {"d_active", p.d_active},
            {"g", p.g},
            {"g_num", p.g_num},
            {"sigma_s2", p.sigma_s2},
            {"sigma_t2", p.sigma_t2},
            {"sigma_m2", p.sigma_m2},
            {"sigma_e2", p.sigma_e2},
            {"seed", p.seed}};
}

inline DatasetPaths write_dataset(const std::filesystem::path& prefix, const SimulatedDataset& ds,
                                  const SimulationParams& params) {
    const auto paths = DatasetPaths::for_prefix(prefix);
    const auto samples = numbered_ids("s", ds.X.rows());
    const auto snps = numbered_ids("snp", ds.X.cols());
    const auto traits = numbered_ids("trait", ds.Y.cols());
    write_matrix_csv(paths.genotypes, ds.X, samples, snps, "sample");
    write_matrix_csv(paths.phenotypes, ds.Y, samples, traits, "sample");
    write_matrix_csv(paths.beta_true, ds.beta_true, snps, traits, "snp");

    nlohmann::json manifest;
    manifest["params"] = params_to_json(params);
    manifest["files"] = {{"genotypes", paths.genotypes.filename().string()},
                         {"phenotypes", paths.phenotypes.filename().string()},
                         {"beta_true", paths.beta_true.filename().string()}};
    manifest["row_permutation"] = ds.row_perm;
    manifest["column_permutation"] = ds.col_perm;
    manifest["cluster_assignment"] = ds.cluster_assignment;
    manifest["population"] = ds.population;
    std::ofstream out(paths.manifest);
    if (!out) throw InvalidInputError("cannot write '" + paths.manifest.string() + "'");
    out << manifest.dump(2) << '\n';
    return paths;
}

}  // namespace sglmm
