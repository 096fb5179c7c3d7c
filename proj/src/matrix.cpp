#include "lafa/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lafa/errors.hpp"

namespace lafa {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        std::ostringstream os;
        os << "DenseMatrix: " << data_.size() << " values cannot fill " << rows << "x" << cols;
        throw ShapeError(os.str());
    }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> v) {
    if (v.size() != rows_) throw ShapeError("DenseMatrix::set_column: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseMatrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " x " +
                         b.shape_string());
    }
    const std::size_t m = a.rows(), n = b.cols(), inner = a.cols();
    DenseMatrix out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.row(i).data();
        for (std::size_t p = 0; p < inner; ++p) {
            const double aip = a(i, p);
            const double* brow = b.row(p).data();
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: row counts differ, " + a.shape_string() + " vs " +
                         b.shape_string());
    }
    const std::size_t m = a.cols(), n = b.cols();
    DenseMatrix out(m, n);
    for (std::size_t p = 0; p < a.rows(); ++p) {
        const double* arow = a.row(p).data();
        const double* brow = b.row(p).data();
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* orow = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) orow[j] += api * brow[j];
        }
    }
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: column counts differ, " + a.shape_string() + " vs " +
                         b.shape_string());
    }
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

namespace {

template <class Op>
DenseMatrix elementwise(const DenseMatrix& a, const DenseMatrix& b, const char* what, Op op) {
    require_same_shape(a, b, what);
    DenseMatrix out(a.rows(), a.cols());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = op(av[i], bv[i]);
    return out;
}

}  // namespace

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    return elementwise(a, b, "operator+", std::plus<>{});
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    return elementwise(a, b, "operator-", std::minus<>{});
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    return elementwise(a, b, "hadamard", std::multiplies<>{});
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

double frobenius_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double frobenius_norm(const DenseMatrix& a) { return frobenius_norm(a.values()); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

double min_entry(const DenseMatrix& a) {
    auto v = a.values();
    return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

double max_entry(const DenseMatrix& a) {
    auto v = a.values();
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

DenseMatrix solve_linear(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != a.cols()) throw ShapeError("solve_linear: matrix is " + a.shape_string());
    if (b.rows() != a.rows()) {
        throw ShapeError("solve_linear: rhs " + b.shape_string() + " does not match " +
                         a.shape_string());
    }
    const std::size_t n = a.rows();
    const std::size_t nrhs = b.cols();
    DenseMatrix lu = a;
    DenseMatrix x = b;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(lu(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(lu(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (!(best >= kSingularPivot)) {
            std::ostringstream os;
            os << "solve_linear: singular matrix, pivot " << best << " at column " << col;
            throw SingularMatrixError(os.str(), best);
        }
        if (piv != col) {
            std::swap_ranges(lu.row(col).begin(), lu.row(col).end(), lu.row(piv).begin());
            std::swap_ranges(x.row(col).begin(), x.row(col).end(), x.row(piv).begin());
        }
        const double inv = 1.0 / lu(col, col);
        const double* prow = lu.row(col).data();
        const double* xp = x.row(col).data();
        for (std::size_t r = col + 1; r < n; ++r) {
            double* rrow = lu.row(r).data();
            const double f = rrow[col] * inv;
            if (f == 0.0) continue;
            rrow[col] = f;
            for (std::size_t c = col + 1; c < n; ++c) rrow[c] -= f * prow[c];
            double* xr = x.row(r).data();
            for (std::size_t c = 0; c < nrhs; ++c) xr[c] -= f * xp[c];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double* xr = x.row(ii).data();
        const double* lrow = lu.row(ii).data();
        for (std::size_t c = ii + 1; c < n; ++c) {
            const double f = lrow[c];
            const double* xc = x.row(c).data();
            for (std::size_t j = 0; j < nrhs; ++j) xr[j] -= f * xc[j];
        }
        const double inv = 1.0 / lrow[ii];
        for (std::size_t j = 0; j < nrhs; ++j) xr[j] *= inv;
    }
    return x;
}

void orthogonalize_columns(DenseMatrix& u, DenseMatrix* companion) {
    const std::size_t m = u.rows(), n = u.cols();
    if (companion && companion->cols() != n) {
        throw ShapeError("orthogonalize_columns: companion has " +
                         std::to_string(companion->cols()) + " columns, expected " +
                         std::to_string(n));
    }
    auto rotate = [](DenseMatrix& a, std::size_t p, std::size_t q, double c, double s) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double ap = a(i, p);
            const double aq = a(i, q);
            a(i, p) = c * ap - s * aq;
            a(i, q) = s * ap + c * aq;
        }
    };
    for (int sweep = 0; sweep < 80; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += u(i, p) * u(i, p);
                    beta += u(i, q) * u(i, q);
                    gamma += u(i, p) * u(i, q);
                }
                if (gamma == 0.0) continue;
                const double scale = std::sqrt(alpha * beta);
                if (scale == 0.0) continue;
                off = std::max(off, std::abs(gamma) / scale);
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(u, p, q, c, s);
                if (companion) rotate(*companion, p, q, c, s);
            }
        }
        if (off < 1e-15) break;
    }
}

std::vector<double> singular_values(const DenseMatrix& a) {
    DenseMatrix u = a.rows() >= a.cols() ? a : transpose(a);
    orthogonalize_columns(u);
    std::vector<double> sv(u.cols());
    for (std::size_t j = 0; j < u.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i) acc += u(i, j) * u(i, j);
        sv[j] = std::sqrt(acc);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>{});
    return sv;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    if (!(lo < hi)) throw PreconditionError("uniform_matrix: requires lo < hi");
    DenseMatrix out(rows, cols);
    for (double& v : out.values()) {
        v = rng.uniform(lo, hi);
        // lo + (hi - lo)·u can round up to hi for u just below 1.
        if (v >= hi) v = std::nextafter(hi, lo);
    }
    return out;
}

}  // namespace lafa
