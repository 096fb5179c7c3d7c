#ifndef LAFA_MATRIX_HPP
#define LAFA_MATRIX_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lafa {

/// Dense row-major matrix of doubles.
///
/// Value type: copies are deep, and nothing is shared between instances, so a
/// const matrix may be read from any number of threads. Non-negativity is not
/// part of the type; modules that need it (NMF inputs and factors) check it at
/// their own boundaries.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Builds from nested braces, e.g. `from_rows({{1, 2}, {3, 4}})`.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    /// Bytes held by the element buffer.
    std::size_t bytes() const noexcept { return data_.size() * sizeof(double); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t j) const;
    void set_column(std::size_t j, std::span<const double> v);

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;
    std::string shape_string() const;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws ShapeError when shapes differ; `what` names the calling operation.
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ·b without forming the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a·bᵀ without forming the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

/// Frobenius norm. Squares are summed in storage order so results are
/// bit-reproducible.
double frobenius_norm(const DenseMatrix& a);
double frobenius_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double max_abs(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double min_entry(const DenseMatrix& a);
double max_entry(const DenseMatrix& a);

/// Pivots with magnitude below this are treated as singular.
inline constexpr double kSingularPivot = 1e-12;

/// Solves a·s = b (b may hold several right-hand sides) by LU with partial
/// pivoting. Throws SingularMatrixError carrying the offending pivot.
DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b);

/// Singular values in descending order (one-sided Jacobi; accurate for the
/// small singular values used in rank diagnostics).
std::vector<double> singular_values(const DenseMatrix& a);

/// Rotates the columns of `u` in place until they are mutually orthogonal
/// (one-sided Jacobi). Every rotation is also applied to the columns of
/// `companion` when it is given, which must have as many columns as `u`.
void orthogonalize_columns(DenseMatrix& u, DenseMatrix* companion = nullptr);

/// Seeded generator with a platform-independent stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Doubles are built directly from the top 53 bits instead of going
/// through std::uniform_real_distribution, whose algorithm is implementation
/// defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller on the uniform stream.
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Entries i.i.d. uniform on [lo, hi). Requires lo < hi.
DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

}  // namespace lafa

#endif  // LAFA_MATRIX_HPP
