#pragma once

// Genotype/phenotype containers, CSV and plink readers, preprocessing
// (imputation and standardization) and result writers.

#include "sglmm/common.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sglmm {

enum class GenotypeEncoding { RawAllele012, Continuous, Standardized };

enum class TraitKind { Continuous, Categorical };

struct GenotypeMatrix {
    Matrix values;        // n x j
    MaskMatrix missing;   // n x j, true where the cell was not observed
    std::vector<std::string> snp_ids;
    std::vector<std::string> sample_ids;
    GenotypeEncoding encoding = GenotypeEncoding::RawAllele012;

    Index samples() const { return values.rows(); }
    Index snps() const { return values.cols(); }
    bool has_missing() const { return missing.size() > 0 && missing.any(); }

    void validate() const;
};

struct PhenotypeMatrix {
    Matrix values;        // n x k
    MaskMatrix missing;   // n x k
    std::vector<std::string> trait_ids;
    std::vector<std::string> sample_ids;
    std::vector<TraitKind> trait_kind;
    // Set by standardization for columns whose variance is zero.
    std::vector<bool> zero_variance;

    Index samples() const { return values.rows(); }
    Index traits() const { return values.cols(); }
    bool has_missing() const { return missing.size() > 0 && missing.any(); }

    void validate() const;
};

struct Selection {
    std::string trait_id;
    std::string snp_id;
    double effect = 0.0;
};

struct Hyperparams {
    double lambda = 0.0;
    double gamma = 0.0;
    double rho = 0.0;
    double delta = 0.0;
    double sigma_g2 = 0.0;
};

struct AssociationResult {
    Matrix beta;  // j x k
    std::vector<Selection> selected;
    Hyperparams hyperparams;
};

namespace detail {

inline void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw InvalidInputError(std::string("duplicate ") + what + " id '" + id + "'");
        }
    }
}

inline bool is_missing_token(std::string_view cell) {
    return cell.empty() || cell == "NA";
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                          s.front() == '"')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                          s.back() == '"')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view cell) {
    double value = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        return std::nullopt;
    }
    return value;
}

// Comma-separated table with a mandatory header row whose first cell names
// the id column. Numeric cells only; "NA" or empty marks a missing value.
struct CsvTable {
    std::vector<std::string> column_ids;
    std::vector<std::string> row_ids;
    Matrix values;
    MaskMatrix missing;
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInputError("cannot open '" + path.string() + "'");
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<bool>> masks;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (!have_header) {
            if (cells.size() < 2) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": header needs an id column and at least one data column");
            }
            for (std::size_t c = 1; c < cells.size(); ++c) {
                table.column_ids.emplace_back(cells[c]);
            }
            have_header = true;
            continue;
        }
        if (cells.size() != table.column_ids.size() + 1) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.column_ids.size() + 1) + " cells, found " +
                             std::to_string(cells.size()));
        }
        table.row_ids.emplace_back(cells[0]);
        std::vector<double> row(table.column_ids.size(), 0.0);
        std::vector<bool> mask(table.column_ids.size(), false);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (is_missing_token(cells[c])) {
                mask[c - 1] = true;
                continue;
            }
            auto v = parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError(path.string() + ": row " + std::to_string(line_no) +
                                 ", column " + std::to_string(c + 1) + ": non-numeric cell '" +
                                 std::string(cells[c]) + "'");
            }
            row[c - 1] = *v;
        }
        rows.push_back(std::move(row));
        masks.push_back(std::move(mask));
    }
    if (!have_header) {
        throw ParseError(path.string() + ": missing header row");
    }
    if (rows.empty()) {
        throw InvalidInputError(path.string() + ": no data rows");
    }
    const Index n = static_cast<Index>(rows.size());
    const Index m = static_cast<Index>(table.column_ids.size());
    table.values.resize(n, m);
    table.missing.resize(n, m);
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < m; ++c) {
            table.values(i, c) = rows[i][c];
            table.missing(i, c) = masks[i][c];
        }
    }
    return table;
}

inline bool all_in_012(const Matrix& values, const MaskMatrix& missing) {
    for (Index c = 0; c < values.cols(); ++c) {
        for (Index r = 0; r < values.rows(); ++r) {
            if (missing(r, c)) continue;
            const double v = values(r, c);
            if (v != 0.0 && v != 1.0 && v != 2.0) return false;
        }
    }
    return true;
}

}  // namespace detail

// A trait is treated as categorical when every observed value is an integer
// and it takes at most this many distinct values.
inline constexpr std::size_t kMaxCategoricalLevels = 10;

inline TraitKind infer_trait_kind(const Eigen::Ref<const Vector>& column,
                                  const std::vector<bool>& missing) {
    std::set<double> levels;
    for (Index i = 0; i < column.size(); ++i) {
        if (missing[static_cast<std::size_t>(i)]) continue;
        const double v = column(i);
        if (v != std::floor(v)) return TraitKind::Continuous;
        levels.insert(v);
        if (levels.size() > kMaxCategoricalLevels) return TraitKind::Continuous;
    }
    return levels.empty() ? TraitKind::Continuous : TraitKind::Categorical;
}

inline void GenotypeMatrix::validate() const {
    if (values.rows() < 1 || values.cols() < 1) {
        throw InvalidInputError("genotype matrix must have at least one sample and one SNP");
    }
    if (missing.rows() != values.rows() || missing.cols() != values.cols()) {
        throw InvalidInputError("genotype missing mask does not match value dimensions");
    }
    if (static_cast<Index>(snp_ids.size()) != values.cols() ||
        static_cast<Index>(sample_ids.size()) != values.rows()) {
        throw InvalidInputError("genotype id lists do not match matrix dimensions");
    }
    detail::check_unique(snp_ids, "SNP");
    detail::check_unique(sample_ids, "sample");
    if (encoding == GenotypeEncoding::RawAllele012 && !detail::all_in_012(values, missing)) {
        throw InvalidInputError("raw genotype values must be 0, 1 or 2");
    }
}

inline void PhenotypeMatrix::validate() const {
    if (values.rows() < 1 || values.cols() < 1) {
        throw InvalidInputError("phenotype matrix must have at least one sample and one trait");
    }
    if (missing.rows() != values.rows() || missing.cols() != values.cols()) {
        throw InvalidInputError("phenotype missing mask does not match value dimensions");
    }
    if (static_cast<Index>(trait_ids.size()) != values.cols() ||
        static_cast<Index>(trait_kind.size()) != values.cols() ||
        static_cast<Index>(sample_ids.size()) != values.rows()) {
        throw InvalidInputError("phenotype id lists do not match matrix dimensions");
    }
    detail::check_unique(trait_ids, "trait");
    detail::check_unique(sample_ids, "sample");
}

// Builds an id-indexed genotype container from a dense matrix. The encoding
// is RawAllele012 when every entry is 0, 1 or 2 and Continuous otherwise.
inline GenotypeMatrix make_genotypes(Matrix values, std::vector<std::string> sample_ids = {},
                                     std::vector<std::string> snp_ids = {}) {
    GenotypeMatrix g;
    const Index n = values.rows();
    const Index j = values.cols();
    if (sample_ids.empty()) {
        for (Index i = 0; i < n; ++i) sample_ids.push_back("s" + std::to_string(i));
    }
    if (snp_ids.empty()) {
        for (Index s = 0; s < j; ++s) snp_ids.push_back("snp" + std::to_string(s));
    }
    g.missing = MaskMatrix::Constant(n, j, false);
    g.encoding = detail::all_in_012(values, g.missing) ? GenotypeEncoding::RawAllele012
                                                       : GenotypeEncoding::Continuous;
    g.values = std::move(values);
    g.sample_ids = std::move(sample_ids);
    g.snp_ids = std::move(snp_ids);
    g.validate();
    return g;
}

inline PhenotypeMatrix make_phenotypes(Matrix values, std::vector<std::string> sample_ids = {},
                                       std::vector<std::string> trait_ids = {}) {
    PhenotypeMatrix p;
    const Index n = values.rows();
    const Index k = values.cols();
    if (sample_ids.empty()) {
        for (Index i = 0; i < n; ++i) sample_ids.push_back("s" + std::to_string(i));
    }
    if (trait_ids.empty()) {
        for (Index t = 0; t < k; ++t) trait_ids.push_back("trait" + std::to_string(t));
    }
    p.missing = MaskMatrix::Constant(n, k, false);
    p.values = std::move(values);
    p.sample_ids = std::move(sample_ids);
    p.trait_ids = std::move(trait_ids);
    p.trait_kind.assign(static_cast<std::size_t>(k), TraitKind::Continuous);
    p.zero_variance.assign(static_cast<std::size_t>(k), false);
    p.validate();
    return p;
}

// Reorders phenotype rows so that their sample ids match `sample_ids`.
// Every id must be present on both sides.
inline PhenotypeMatrix align_samples(const PhenotypeMatrix& p,
                                     const std::vector<std::string>& sample_ids) {
    if (p.sample_ids.size() != sample_ids.size()) {
        throw AlignmentError("genotype has " + std::to_string(sample_ids.size()) +
                             " samples but phenotype has " + std::to_string(p.sample_ids.size()));
    }
    std::unordered_map<std::string, Index> row_of;
    for (std::size_t i = 0; i < p.sample_ids.size(); ++i) {
        row_of.emplace(p.sample_ids[i], static_cast<Index>(i));
    }
    PhenotypeMatrix out = p;
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        auto it = row_of.find(sample_ids[i]);
        if (it == row_of.end()) {
            throw AlignmentError("sample '" + sample_ids[i] + "' has no phenotype row");
        }
        out.values.row(static_cast<Index>(i)) = p.values.row(it->second);
        out.missing.row(static_cast<Index>(i)) = p.missing.row(it->second);
    }
    out.sample_ids = sample_ids;
    return out;
}

inline GenotypeMatrix read_genotype_csv(const std::filesystem::path& path) {
    auto table = detail::read_csv_table(path);
    GenotypeMatrix g;
    g.values = std::move(table.values);
    g.missing = std::move(table.missing);
    g.snp_ids = std::move(table.column_ids);
    g.sample_ids = std::move(table.row_ids);
    g.encoding = detail::all_in_012(g.values, g.missing) ? GenotypeEncoding::RawAllele012
                                                         : GenotypeEncoding::Continuous;
    g.validate();
    return g;
}

inline PhenotypeMatrix read_phenotype_csv(const std::filesystem::path& path) {
    auto table = detail::read_csv_table(path);
    PhenotypeMatrix p;
    p.values = std::move(table.values);
    p.missing = std::move(table.missing);
    p.trait_ids = std::move(table.column_ids);
    p.sample_ids = std::move(table.row_ids);
    const Index k = p.values.cols();
    for (Index t = 0; t < k; ++t) {
        std::vector<bool> mask(static_cast<std::size_t>(p.values.rows()));
        for (Index i = 0; i < p.values.rows(); ++i) mask[static_cast<std::size_t>(i)] = p.missing(i, t);
        p.trait_kind.push_back(infer_trait_kind(p.values.col(t), mask));
    }
    p.zero_variance.assign(static_cast<std::size_t>(k), false);
    p.validate();
    return p;
}

// Genotype CSV is samples x SNPs, phenotype CSV samples x traits; both with a
// header row and sample ids in the first column. Phenotype rows are reordered
// to follow the genotype sample order.
inline std::pair<GenotypeMatrix, PhenotypeMatrix> load_csv(const std::filesystem::path& genotype_path,
                                                           const std::filesystem::path& phenotype_path) {
    GenotypeMatrix g = read_genotype_csv(genotype_path);
    PhenotypeMatrix p = read_phenotype_csv(phenotype_path);
    return {std::move(g), align_samples(p, g.sample_ids)};
}

// ---------------------------------------------------------------------------
// plink binary (.bed/.bim/.fam), SNP-major.

namespace plink {

inline constexpr std::array<unsigned char, 3> kBedMagic = {0x6C, 0x1B, 0x01};

inline constexpr double kMissing = -1.0;

// 2-bit code -> allele count (kMissing for the missing code 01).
inline double decode(unsigned code) {
    switch (code & 0x3u) {
        case 0x0: return 2.0;
        case 0x1: return kMissing;
        case 0x2: return 1.0;
        default: return 0.0;
    }
}

inline unsigned encode(double value, bool missing) {
    if (missing) return 0x1;
    if (value == 2.0) return 0x0;
    if (value == 1.0) return 0x2;
    if (value == 0.0) return 0x3;
    throw InvalidInputError("plink genotypes must be 0, 1, 2 or missing");
}

inline std::size_t bytes_per_snp(Index n) { return static_cast<std::size_t>((n + 3) / 4); }

struct FamRecord {
    std::string family_id;
    std::string sample_id;
    std::optional<double> phenotype;
};

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        lines.push_back(line);
    }
    return lines;
}

inline std::vector<FamRecord> read_fam(const std::filesystem::path& path) {
    std::vector<FamRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        auto f = detail::split_whitespace(line);
        if (f.size() < 6) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected 6 fields");
        }
        FamRecord rec{std::string(f[0]), std::string(f[1]), std::nullopt};
        if (!detail::is_missing_token(f[5])) {
            auto v = detail::parse_double(f[5]);
            if (!v) {
                throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                                 ", column 6: non-numeric phenotype '" + std::string(f[5]) + "'");
            }
            if (*v != -9.0 && *v != 0.0) rec.phenotype = *v;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<std::string> read_bim_ids(const std::filesystem::path& path) {
    std::vector<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        auto f = detail::split_whitespace(line);
        if (f.size() < 2) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected at least 2 fields");
        }
        ids.emplace_back(f[1]);
    }
    return ids;
}

inline std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* ext) {
    return std::filesystem::path(prefix.string() + ext);
}

inline GenotypeMatrix read_bed(const std::filesystem::path& bed_path,
                               std::vector<std::string> sample_ids,
                               std::vector<std::string> snp_ids) {
    std::ifstream in(bed_path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open '" + bed_path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 3 || bytes[0] != kBedMagic[0] || bytes[1] != kBedMagic[1]) {
        throw FormatError(bed_path.string() + ": bad magic bytes (not a plink .bed file)");
    }
    if (bytes[2] != kBedMagic[2]) {
        throw FormatError(bed_path.string() + ": only SNP-major mode (0x01) is supported");
    }
    const Index n = static_cast<Index>(sample_ids.size());
    const Index j = static_cast<Index>(snp_ids.size());
    const std::size_t stride = bytes_per_snp(n);
    const std::size_t expected = 3 + stride * static_cast<std::size_t>(j);
    if (bytes.size() != expected) {
        throw TruncationError(bed_path.string() + ": size " + std::to_string(bytes.size()) +
                              " bytes does not match " + std::to_string(n) + " samples x " +
                              std::to_string(j) + " SNPs (expected " + std::to_string(expected) +
                              ")");
    }
    GenotypeMatrix g;
    g.values = Matrix::Zero(n, j);
    g.missing = MaskMatrix::Constant(n, j, false);
    for (Index s = 0; s < j; ++s) {
        const unsigned char* block = bytes.data() + 3 + stride * static_cast<std::size_t>(s);
        for (Index i = 0; i < n; ++i) {
            const unsigned code = (block[i / 4] >> (2 * (i % 4))) & 0x3u;
            const double v = decode(code);
            if (v == kMissing) {
                g.missing(i, s) = true;
            } else {
                g.values(i, s) = v;
            }
        }
    }
    g.sample_ids = std::move(sample_ids);
    g.snp_ids = std::move(snp_ids);
    g.encoding = GenotypeEncoding::RawAllele012;
    g.validate();
    return g;
}

}  // namespace plink

// Reads prefix.bed/.bim/.fam. Phenotypes come from prefix.pheno.csv when that
// file exists (multi-trait, aligned by sample id), otherwise from .fam column 6
// where -9 and 0 mark missing values.
inline std::pair<GenotypeMatrix, PhenotypeMatrix> load_plink(const std::filesystem::path& prefix) {
    const auto fam = plink::read_fam(plink::with_suffix(prefix, ".fam"));
    const auto snp_ids = plink::read_bim_ids(plink::with_suffix(prefix, ".bim"));
    std::vector<std::string> sample_ids;
    for (const auto& rec : fam) sample_ids.push_back(rec.sample_id);
    GenotypeMatrix g = plink::read_bed(plink::with_suffix(prefix, ".bed"), sample_ids, snp_ids);

    const auto pheno_csv = plink::with_suffix(prefix, ".pheno.csv");
    if (std::filesystem::exists(pheno_csv)) {
        PhenotypeMatrix p = read_phenotype_csv(pheno_csv);
        return {std::move(g), align_samples(p, g.sample_ids)};
    }

    PhenotypeMatrix p;
    const Index n = static_cast<Index>(fam.size());
    p.values = Matrix::Zero(n, 1);
    p.missing = MaskMatrix::Constant(n, 1, false);
    for (Index i = 0; i < n; ++i) {
        const auto& ph = fam[static_cast<std::size_t>(i)].phenotype;
        if (ph) {
            p.values(i, 0) = *ph;
        } else {
            p.missing(i, 0) = true;
        }
    }
    p.sample_ids = g.sample_ids;
    p.trait_ids = {"pheno"};
    std::vector<bool> mask(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = p.missing(i, 0);
    p.trait_kind = {infer_trait_kind(p.values.col(0), mask)};
    p.zero_variance = {false};
    p.validate();
    return {std::move(g), std::move(p)};
}

// Writes a canonical plink triple. Padding bits of the final byte of each SNP
// block are zero, so write -> read -> write reproduces identical files.
inline void write_plink(const std::filesystem::path& prefix, const GenotypeMatrix& g,
                        const std::optional<Vector>& phenotype = std::nullopt) {
    g.validate();
    const Index n = g.samples();
    const Index j = g.snps();
    if (phenotype && phenotype->size() != n) {
        throw InvalidInputError("phenotype length does not match sample count");
    }
    {
        std::ofstream bed(plink::with_suffix(prefix, ".bed"), std::ios::binary);
        if (!bed) throw InvalidInputError("cannot write '" + prefix.string() + ".bed'");
        bed.write(reinterpret_cast<const char*>(plink::kBedMagic.data()), 3);
        std::vector<unsigned char> block(plink::bytes_per_snp(n));
        for (Index s = 0; s < j; ++s) {
            std::fill(block.begin(), block.end(), 0);
            for (Index i = 0; i < n; ++i) {
                const unsigned code = plink::encode(g.values(i, s), g.missing(i, s));
                block[static_cast<std::size_t>(i / 4)] |=
                    static_cast<unsigned char>(code << (2 * (i % 4)));
            }
            bed.write(reinterpret_cast<const char*>(block.data()),
                      static_cast<std::streamsize>(block.size()));
        }
    }
    {
        std::ofstream bim(plink::with_suffix(prefix, ".bim"));
        for (Index s = 0; s < j; ++s) {
            bim << "0\t" << g.snp_ids[static_cast<std::size_t>(s)] << "\t0\t" << (s + 1)
                << "\tA\tG\n";
        }
    }
    {
        std::ofstream fam(plink::with_suffix(prefix, ".fam"));
        for (Index i = 0; i < n; ++i) {
            const auto& id = g.sample_ids[static_cast<std::size_t>(i)];
            fam << id << '\t' << id << "\t0\t0\t0\t";
            if (phenotype) {
                fam << format_double((*phenotype)(i));
            } else {
                fam << "-9";
            }
            fam << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Preprocessing.

// Missing genotypes become 0, the most common genotype.
inline GenotypeMatrix impute_genotypes(const GenotypeMatrix& g) {
    if (g.encoding != GenotypeEncoding::RawAllele012) {
        throw InvalidInputError("genotype imputation requires raw 0/1/2 encoding");
    }
    GenotypeMatrix out = g;
    for (Index c = 0; c < out.values.cols(); ++c) {
        for (Index r = 0; r < out.values.rows(); ++r) {
            if (out.missing(r, c)) out.values(r, c) = 0.0;
        }
    }
    out.missing.setConstant(false);
    return out;
}

// Per-SNP centering and scaling to unit population variance. Constant SNPs
// become all-zero columns.
inline GenotypeMatrix standardize_genotypes(const GenotypeMatrix& g) {
    if (g.has_missing()) {
        throw InvalidInputError("cannot standardize genotypes with missing entries");
    }
    GenotypeMatrix out = g;
    const double n = static_cast<double>(g.samples());
    for (Index s = 0; s < g.snps(); ++s) {
        auto col = out.values.col(s);
        const double mean = col.mean();
        col.array() -= mean;
        const double sd = std::sqrt(col.squaredNorm() / n);
        if (sd > 0.0) {
            col /= sd;
        } else {
            col.setZero();
        }
    }
    out.encoding = GenotypeEncoding::Standardized;
    return out;
}

// Centers each column and scales it to unit population variance (divide by
// n). Returns false for a zero-variance column, which is set to 0.
inline bool standardize_column(Eigen::Ref<Vector> col) {
    const double n = static_cast<double>(col.size());
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (!(sd > 1e-12)) {
        col.setZero();
        return false;
    }
    col /= sd;
    return true;
}

inline Matrix standardize_columns(Matrix m) {
    for (Index c = 0; c < m.cols(); ++c) {
        Vector col = m.col(c);
        standardize_column(col);
        m.col(c) = col;
    }
    return m;
}

// Continuous traits: missing <- observed mean. Categorical traits: missing <-
// observed mode, ties to the smallest value. Then every column is standardized.
inline PhenotypeMatrix impute_and_standardize_phenotypes(const PhenotypeMatrix& p) {
    PhenotypeMatrix out = p;
    const Index n = p.samples();
    out.zero_variance.assign(static_cast<std::size_t>(p.traits()), false);
    for (Index t = 0; t < p.traits(); ++t) {
        std::vector<double> observed;
        for (Index i = 0; i < n; ++i) {
            if (!p.missing(i, t)) observed.push_back(p.values(i, t));
        }
        if (observed.empty()) {
            throw InvalidInputError("trait '" + p.trait_ids[static_cast<std::size_t>(t)] +
                                    "' has no observed values to impute from");
        }
        double fill = 0.0;
        if (p.trait_kind[static_cast<std::size_t>(t)] == TraitKind::Categorical) {
            std::map<double, std::size_t> counts;
            for (double v : observed) ++counts[v];
            std::size_t best = 0;
            for (const auto& [value, count] : counts) {  // ascending keys
                if (count > best) {
                    best = count;
                    fill = value;
                }
            }
        } else {
            double sum = 0.0;
            for (double v : observed) sum += v;
            fill = sum / static_cast<double>(observed.size());
        }
        Vector col = p.values.col(t);
        for (Index i = 0; i < n; ++i) {
            if (p.missing(i, t)) col(i) = fill;
        }
        out.zero_variance[static_cast<std::size_t>(t)] = !standardize_column(col);
        out.values.col(t) = col;
    }
    out.missing.setConstant(false);
    return out;
}

// ---------------------------------------------------------------------------
// Results.

// Lists every nonzero entry of beta (j x k), largest |effect| first. Ties keep
// trait-major then SNP order.
inline AssociationResult make_result(const Matrix& beta, const std::vector<std::string>& snp_ids,
                                     const std::vector<std::string>& trait_ids,
                                     const Hyperparams& hyper) {
    if (static_cast<Index>(snp_ids.size()) != beta.rows() ||
        static_cast<Index>(trait_ids.size()) != beta.cols()) {
        throw InvalidInputError("id lists do not match effect matrix dimensions");
    }
    AssociationResult result;
    result.beta = beta;
    result.hyperparams = hyper;
    for (Index t = 0; t < beta.cols(); ++t) {
        for (Index s = 0; s < beta.rows(); ++s) {
            if (beta(s, t) != 0.0) {
                result.selected.push_back({trait_ids[static_cast<std::size_t>(t)],
                                           snp_ids[static_cast<std::size_t>(s)], beta(s, t)});
            }
        }
    }
    std::stable_sort(result.selected.begin(), result.selected.end(),
                     [](const Selection& a, const Selection& b) {
                         return std::abs(a.effect) > std::abs(b.effect);
                     });
    return result;
}

inline void write_output(std::ostream& os, const AssociationResult& result) {
    for (const auto& sel : result.selected) {
        os << sel.trait_id << '\t' << sel.snp_id << '\t' << format_double(sel.effect) << '\n';
    }
}

inline void write_output(const std::filesystem::path& path, const AssociationResult& result) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    write_output(out, result);
}

// Dense matrix as CSV: header "<corner>,<col ids>", then "<row id>,<values>".
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                             const std::vector<std::string>& row_ids,
                             const std::vector<std::string>& col_ids,
                             const std::string& corner = "id") {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    out << corner;
    for (const auto& c : col_ids) out << ',' << c;
    out << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        out << row_ids[static_cast<std::size_t>(r)];
        for (Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
        out << '\n';
    }
}

struct LabeledMatrix {
    Matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
};

inline LabeledMatrix read_matrix_csv(const std::filesystem::path& path) {
    auto table = detail::read_csv_table(path);
    if (table.missing.any()) {
        throw InvalidInputError(path.string() + ": matrix file contains missing cells");
    }
    return {std::move(table.values), std::move(table.row_ids), std::move(table.column_ids)};
}

// Reads a `.output` triplet file back onto a dense matrix indexed by the given
// SNP (rows) and trait (columns) ids. Unlisted entries are zero.
inline Matrix read_output(const std::filesystem::path& path, const std::vector<std::string>& snp_ids,
                          const std::vector<std::string>& trait_ids) {
    std::unordered_map<std::string, Index> row_of, col_of;
    for (std::size_t i = 0; i < snp_ids.size(); ++i) row_of.emplace(snp_ids[i], static_cast<Index>(i));
    for (std::size_t i = 0; i < trait_ids.size(); ++i) col_of.emplace(trait_ids[i], static_cast<Index>(i));
    Matrix out = Matrix::Zero(static_cast<Index>(snp_ids.size()), static_cast<Index>(trait_ids.size()));
    std::size_t line_no = 0;
    for (const auto& line : plink::read_lines(path)) {
        ++line_no;
        auto f = detail::split(line, '\t');
        if (f.size() != 3) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": expected trait<TAB>snp<TAB>effect");
        }
        auto c = col_of.find(std::string(f[0]));
        auto r = row_of.find(std::string(f[1]));
        if (c == col_of.end() || r == row_of.end()) {
            throw AlignmentError(path.string() + ": line " + std::to_string(line_no) +
                                 ": unknown trait or SNP id");
        }
        auto v = detail::parse_double(f[2]);
        if (!v) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ", column 3: non-numeric effect");
        }
        out(r->second, c->second) = *v;
    }
    return out;
}

}  // namespace sglmm
