#ifndef LAFA_DATA_IO_HPP
#define LAFA_DATA_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lafa/matrix.hpp"

namespace lafa {

/// Parameters of the rank-3 "Gaussians plus spikes" dataset.
///
/// W column 0 = gauss₀ + spike₀, column 1 = gauss₁ + spike₁, column 2 =
/// mix[0]·gauss₀ + mix[1]·gauss₁ + spike₂. Gaussians have unit peak; H is
/// uniform on [0, 1).
struct SyntheticSpec {
    std::size_t m = 100;
    std::size_t n = 200;
    std::size_t k = 3;
    std::vector<double> gaussian_centers{30.0, 70.0};
    std::vector<double> gaussian_widths{10.0, 10.0};
    std::vector<std::size_t> spike_positions{15, 85, 50};
    std::vector<double> spike_heights{1.0, 1.0, 1.0};
    std::vector<double> mix_coefficients{0.5, 0.5};
    std::uint64_t seed = 0;
};

/// Scalar map applied to raw data: normalized = (raw − offset) / scale.
struct Normalization {
    double offset = 0.0;
    double scale = 1.0;
    bool degenerate = false;  ///< raw data was constant
};

struct DatasetBundle {
    std::string name;
    DenseMatrix x;  ///< normalized into [0, 1]
    /// Ground-truth factors in normalized units: x = w_true·h_true exactly
    /// up to rounding for synthetic data.
    std::optional<DenseMatrix> w_true;
    std::optional<DenseMatrix> h_true;
    Normalization normalization;
};

/// Builds the synthetic bundle. X is scaled by 1/max so it lands in [0, 1]
/// while staying exactly rank 3; w_true carries the same scale.
DatasetBundle gen_synthetic(const SyntheticSpec& spec);

/// Small instance for gradient checks: W, H uniform on [0.1, 1) with entry
/// (i, p) of W and (p, j) of H zeroed when (i + p) or (j + p) is a multiple of 3,
/// X = W·H plus uniform noise on [0, noise), all divided by max(X).
/// The zero pattern keeps the factorization close to identifiable.
struct ToySpec {
    std::size_t m = 10;
    std::size_t n = 12;
    std::size_t k = 2;
    double noise = 0.05;
    std::uint64_t seed = 42;
};

/// w_true/h_true are the noise-free factors in the same units as x.
DatasetBundle gen_toy(const ToySpec& spec);

/// Raw (unnormalized) W_true of the spec.
DenseMatrix synthetic_w(const SyntheticSpec& spec);

/// Zeroes the spike rows' spike contributions, leaving the Gaussian parts; the
/// result has numerical rank 2.
DenseMatrix remove_spikes(const DenseMatrix& w_true, const SyntheticSpec& spec);

/// x′ = (x − min)/(max − min); constant input maps to zeros, flagged degenerate.
struct NormalizedMatrix {
    DenseMatrix x;
    Normalization normalization;
};
NormalizedMatrix normalize_unit(const DenseMatrix& x);

enum class MatrixFormat { csv, raw_f64 };

std::optional<MatrixFormat> parse_matrix_format(std::string_view name);
/// Format from the file extension: ".csv" → csv, anything else → raw-f64.
MatrixFormat format_from_path(const std::filesystem::path& path);

struct LoadOptions {
    /// Shift by the minimum when entries are negative instead of rejecting.
    bool allow_shift = false;
};

/// CSV: optional header line, comma-separated rows of equal length.
/// raw-f64: two little-endian u64 (rows, cols) then row-major little-endian doubles.
DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                        const LoadOptions& options = {});
void save_matrix(const std::filesystem::path& path, const DenseMatrix& x, MatrixFormat format);

DenseMatrix parse_csv_matrix(std::string_view text, const LoadOptions& options = {});
std::string to_csv(const DenseMatrix& x);
std::vector<unsigned char> to_raw_f64(const DenseMatrix& x);
DenseMatrix parse_raw_f64(const std::vector<unsigned char>& bytes, const LoadOptions& options = {});

}  // namespace lafa

#endif  // LAFA_DATA_IO_HPP
