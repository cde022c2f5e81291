// Command-line front end: association (default), simulation and evaluation.

#include "sglmm/dataset_io.hpp"
#include "sglmm/sglmm.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace sglmm;

namespace {

constexpr int kExitData = 1;
constexpr int kExitEmpty = 3;

struct AssocConfig {
    std::string filetype = "plink";
    std::string filename;
    std::optional<double> lambda;
    std::optional<int> snum;
    double threshold = kDefaultCorrelationThreshold;
    double gamma = 1.0;
    bool quiet = false;
    bool skip_impute = false;
    std::string pheno;
    int folds = kDefaultFolds;
    std::string kinship_cache;
};

struct EvaluateConfig {
    std::string beta_hat;
    std::string beta_true;
    std::string out_dir = ".";
};

void apply_thread_override() {
    if (const char* env = std::getenv("SGLMM_THREADS")) {
        const int threads = std::atoi(env);
        if (threads > 0) Eigen::setNbThreads(threads);
    }
}

fs::path default_pheno_path(const fs::path& genotype_csv) {
    fs::path p = genotype_csv;
    p.replace_extension(".pheno.csv");
    return p;
}

int run_assoc(const AssocConfig& cfg) {
    auto log = [&](const std::string& msg) {
        if (!cfg.quiet) std::cerr << "[sglmm] " << msg << '\n';
    };
    if (cfg.filename.empty()) throw ConfigError("an input file is required (-n)");

    GenotypeMatrix geno;
    PhenotypeMatrix pheno;
    if (cfg.filetype == "csv") {
        const fs::path pheno_path = cfg.pheno.empty() ? default_pheno_path(cfg.filename) : fs::path(cfg.pheno);
        log("reading " + cfg.filename + " and " + pheno_path.string());
        std::tie(geno, pheno) = load_csv(cfg.filename, pheno_path);
    } else {
        log("reading plink fileset " + cfg.filename);
        std::tie(geno, pheno) = load_plink(cfg.filename);
    }
    log(std::to_string(geno.samples()) + " samples, " + std::to_string(geno.snps()) + " SNPs, " +
        std::to_string(pheno.traits()) + " traits");

    if (geno.has_missing()) {
        if (cfg.skip_impute) {
            throw InvalidInputError("genotypes contain missing entries and -m disables imputation");
        }
        geno = impute_genotypes(geno);
    }
    pheno = impute_and_standardize_phenotypes(pheno);
    for (std::size_t t = 0; t < pheno.zero_variance.size(); ++t) {
        if (pheno.zero_variance[t]) log("warning: trait '" + pheno.trait_ids[t] + "' has zero variance");
    }

    PipelineOptions opts;
    opts.rho = cfg.threshold;
    opts.gamma = cfg.gamma;
    opts.lambda = cfg.lambda;
    opts.snum = cfg.snum;
    opts.folds = cfg.folds;
    opts.log = log;
    if (!cfg.kinship_cache.empty()) {
        const auto hash = content_hash(geno.values);
        opts.spectrum = load_spectrum_cache(cfg.kinship_cache, hash);
        if (opts.spectrum) {
            log("kinship spectrum loaded from cache");
        } else {
            opts.spectrum = eigendecompose(compute_rrm(geno.values));
            save_spectrum_cache(cfg.kinship_cache, *opts.spectrum, hash);
        }
    }

    const PipelineResult res = run_pipeline(geno.values, pheno.values, opts);

    const fs::path out_path = cfg.filename + ".output";
    if (res.ran_cv) {
        const fs::path cv_path = cfg.filename + ".cv.csv";
        write_cv_table(cv_path, res.tuning);
        log("cross-validation table written to " + cv_path.string());
    }
    Hyperparams hyper{res.lambda, cfg.gamma, cfg.threshold, res.null_fit.delta, res.null_fit.sigma_g2};
    const auto result = make_result(res.beta, geno.snp_ids, pheno.trait_ids, hyper);
    write_output(out_path, result);
    if (result.selected.empty()) {
        std::cerr << "error: no SNP was selected; " << out_path.string() << " is empty\n";
        return kExitEmpty;
    }
    log(std::to_string(result.selected.size()) + " associations written to " + out_path.string());
    return 0;
}

int run_simulate(const SimulationParams& params, const std::string& out) {
    params.validate();
    const auto ds = simulate(params);
    const auto paths = write_dataset(out, ds, params);
    std::cerr << "[sglmm] dataset written to " << paths.genotypes.string() << ", "
              << paths.phenotypes.string() << ", " << paths.beta_true.string() << ", "
              << paths.manifest.string() << '\n';
    return 0;
}

int run_evaluate(const EvaluateConfig& cfg) {
    const auto truth = read_matrix_csv(cfg.beta_true);
    Matrix hat;
    if (fs::path(cfg.beta_hat).extension() == ".output") {
        hat = read_output(cfg.beta_hat, truth.row_ids, truth.col_ids);
    } else {
        hat = read_matrix_csv(cfg.beta_hat).values;
    }
    if (hat.rows() != truth.values.rows() || hat.cols() != truth.values.cols()) {
        throw InvalidInputError("estimated and true effect matrices differ in shape");
    }
    const auto curve = roc(hat, truth.values);
    const auto pr = precision_recall(hat, truth.values);
    fs::create_directories(cfg.out_dir);
    write_curve_csv(fs::path(cfg.out_dir) / "roc.csv", "fpr,tpr", curve.points);
    write_curve_csv(fs::path(cfg.out_dir) / "pr.csv", "recall,precision", pr);
    std::cout << "auroc=" << format_decimal(curve.auroc) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse graph-structured linear mixed model for multi-trait association"};
    app.require_subcommand(0, 1);

    AssocConfig assoc;
    app.add_option("-t", assoc.filetype, "input file type")
        ->check(CLI::IsMember({"csv", "plink"}))
        ->capture_default_str();
    app.add_option("-n", assoc.filename, "genotype file (csv) or plink prefix");
    auto* lambda_opt = app.add_option("--lambda", assoc.lambda, "weight of the sparsity penalty");
    auto* snum_opt = app.add_option("--snum", assoc.snum, "number of SNPs to select per trait")
                         ->check(CLI::PositiveNumber);
    lambda_opt->excludes(snum_opt);
    snum_opt->excludes(lambda_opt);
    app.add_option("--threshold", assoc.threshold, "correlation threshold for trait relatedness")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--gamma", assoc.gamma, "weight of the graph fusion penalty")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_flag("-q", assoc.quiet, "suppress progress messages");
    app.add_flag("-m", assoc.skip_impute, "run without missing genotype imputation");
    app.add_option("--pheno", assoc.pheno, "phenotype CSV (csv mode; default <stem>.pheno.csv)");
    app.add_option("--folds", assoc.folds, "cross-validation folds")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    app.add_option("--kinship-cache", assoc.kinship_cache, "cache file for the kinship spectrum");

    auto* assoc_cmd = app.add_subcommand("assoc", "run the association pipeline (default)");
    assoc_cmd->fallthrough();

    SimulationParams sim;
    std::string sim_out = "simulated";
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
    sim_cmd->add_option("--n", sim.n, "samples")->capture_default_str();
    sim_cmd->add_option("--j", sim.j, "SNPs")->capture_default_str();
    sim_cmd->add_option("--k", sim.k, "traits")->capture_default_str();
    sim_cmd->add_option("--d", sim.d_active, "fraction of active SNPs")->capture_default_str();
    sim_cmd->add_option("--g", sim.g, "subpopulations")->capture_default_str();
    sim_cmd->add_option("--gnum", sim.g_num, "trait clusters")->capture_default_str();
    sim_cmd->add_option("--sigma-s2", sim.sigma_s2, "within-population genotype variance")->capture_default_str();
    sim_cmd->add_option("--sigma-t2", sim.sigma_t2, "population confounding variance")->capture_default_str();
    sim_cmd->add_option("--sigma-m2", sim.sigma_m2, "shared trait covariance")->capture_default_str();
    sim_cmd->add_option("--sigma-e2", sim.sigma_e2, "noise variance")->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed, "random seed")->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "output prefix")->capture_default_str();

    EvaluateConfig eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "score an estimated effect matrix");
    eval_cmd->add_option("--beta-hat", eval.beta_hat, "estimated effects (matrix CSV or .output)")->required();
    eval_cmd->add_option("--beta-true", eval.beta_true, "true effects (matrix CSV)")->required();
    eval_cmd->add_option("--out-dir", eval.out_dir, "directory for roc.csv and pr.csv")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    apply_thread_override();
    try {
        if (*sim_cmd) return run_simulate(sim, sim_out);
        if (*eval_cmd) return run_evaluate(eval);
        return run_assoc(assoc);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
