#pragma once

// Realized relationship matrix and its spectral decomposition.

#include "sglmm/common.hpp"
#include "sglmm/io.hpp"

#include <Eigen/Eigenvalues>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>

namespace sglmm {

// K = U diag(d) U^T with d sorted descending and clipped at zero.
struct KinshipSpectrum {
    Matrix U;
    Vector d;

    Index size() const { return d.size(); }

    Matrix reconstruct() const { return U * d.asDiagonal() * U.transpose(); }

    // Spectrum of the identity kinship. Used when no relatedness correction
    // is wanted.
    static KinshipSpectrum identity(Index n) {
        return {Matrix::Identity(n, n), Vector::Ones(n)};
    }
};

// K = X X^T / j.
inline Matrix compute_rrm(const Matrix& X) {
    if (X.cols() == 0 || X.rows() == 0) {
        throw InvalidInputError("kinship needs at least one sample and one SNP");
    }
    Matrix K = Matrix::Zero(X.rows(), X.rows());
    K.selfadjointView<Eigen::Lower>().rankUpdate(X, 1.0 / static_cast<double>(X.cols()));
    K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
    return K;
}

inline Matrix compute_rrm(const GenotypeMatrix& g) {
    if (g.has_missing()) {
        throw InvalidInputError("kinship requires complete genotypes (impute first)");
    }
    return compute_rrm(g.values);
}

// Relative tolerance below which negative eigenvalues are treated as rounding.
inline constexpr double kEigenClipTolerance = 1e-8;

inline KinshipSpectrum eigendecompose(const Matrix& K) {
    if (K.rows() != K.cols() || K.rows() == 0) {
        throw InvalidInputError("kinship matrix must be square and non-empty");
    }
    const Matrix sym = 0.5 * (K + K.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigendecomposition of the kinship matrix did not converge");
    }
    const Vector& ascending = solver.eigenvalues();
    const Index n = ascending.size();
    const double scale = ascending.cwiseAbs().maxCoeff();
    const double floor = -kEigenClipTolerance * scale;

    KinshipSpectrum spectrum;
    spectrum.U.resize(n, n);
    spectrum.d.resize(n);
    for (Index i = 0; i < n; ++i) {
        const Index src = n - 1 - i;
        double value = ascending(src);
        if (value < floor) {
            throw NumericError("kinship matrix is not positive semi-definite (eigenvalue " +
                               format_double(value) + ")");
        }
        spectrum.d(i) = value < 0.0 ? 0.0 : value;
        spectrum.U.col(i) = solver.eigenvectors().col(src);
    }
    return spectrum;
}

// ---------------------------------------------------------------------------
// Spectrum cache. Layout: uint64 n, uint64 hash, then U (n x n, row-major
// doubles) and d (n doubles), native byte order.

// FNV-1a over the shape and raw bytes of X.
inline std::uint64_t content_hash(const Matrix& X) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t rows = X.rows(), cols = X.cols();
    mix(&rows, sizeof rows);
    mix(&cols, sizeof cols);
    mix(X.data(), sizeof(double) * static_cast<std::size_t>(X.size()));
    return h;
}

inline void save_spectrum_cache(const std::filesystem::path& path, const KinshipSpectrum& spectrum,
                                std::uint64_t hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    const std::uint64_t n = static_cast<std::uint64_t>(spectrum.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&hash), sizeof hash);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rowmajor = spectrum.U;
    out.write(reinterpret_cast<const char*>(rowmajor.data()),
              static_cast<std::streamsize>(sizeof(double) * rowmajor.size()));
    out.write(reinterpret_cast<const char*>(spectrum.d.data()),
              static_cast<std::streamsize>(sizeof(double) * spectrum.d.size()));
}

// Returns nothing when the file is absent, malformed or keyed to other data.
inline std::optional<KinshipSpectrum> load_spectrum_cache(const std::filesystem::path& path,
                                                          std::uint64_t hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint64_t n = 0, stored = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (!in || stored != hash || n == 0 || n > (1u << 20)) return std::nullopt;
    const auto size = static_cast<Index>(n);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rowmajor(size, size);
    KinshipSpectrum spectrum;
    spectrum.d.resize(size);
    in.read(reinterpret_cast<char*>(rowmajor.data()),
            static_cast<std::streamsize>(sizeof(double) * rowmajor.size()));
    in.read(reinterpret_cast<char*>(spectrum.d.data()),
            static_cast<std::streamsize>(sizeof(double) * spectrum.d.size()));
    if (!in) return std::nullopt;
    spectrum.U = rowmajor;
    return spectrum;
}

}  // namespace sglmm
