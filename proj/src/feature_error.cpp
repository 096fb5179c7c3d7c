#include "lafa/feature_error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lafa/errors.hpp"

namespace lafa {

DenseMatrix BalancedFeatures::w_block() const {
    DenseMatrix out(m_rows, wh.cols());
    for (std::size_t i = 0; i < m_rows; ++i)
        std::copy(wh.row(i).begin(), wh.row(i).end(), out.row(i).begin());
    return out;
}

DenseMatrix BalancedFeatures::h_block() const {
    const std::size_t n = wh.rows() - m_rows;
    DenseMatrix out(wh.cols(), n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < wh.cols(); ++p) out(p, j) = wh(m_rows + j, p);
    return out;
}

namespace {

struct ComponentNorms {
    std::vector<double> w;  // ‖Wᵢ‖ over columns
    std::vector<double> h;  // ‖Hᵢ‖ over rows
};

ComponentNorms component_norms(const DenseMatrix& w, const DenseMatrix& h) {
    if (w.cols() != h.rows()) {
        throw ShapeError("balance: rank mismatch " + w.shape_string() + " vs " + h.shape_string());
    }
    const std::size_t k = w.cols();
    ComponentNorms norms{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t p = 0; p < k; ++p) norms.w[p] += w(i, p) * w(i, p);
    for (std::size_t p = 0; p < k; ++p) {
        norms.w[p] = std::sqrt(norms.w[p]);
        norms.h[p] = frobenius_norm(h.row(p));
    }
    return norms;
}

BalancedFeatures assemble_balanced(const DenseMatrix& w, const DenseMatrix& h,
                                   const ComponentNorms& norms) {
    const std::size_t m = w.rows(), n = h.cols(), k = w.cols();
    BalancedFeatures out{DenseMatrix(m + n, k), m};
    for (std::size_t p = 0; p < k; ++p) {
        const double s = std::sqrt(norms.w[p] * norms.h[p]);
        const double w_scale = s / norms.w[p];
        const double h_scale = s / norms.h[p];
        for (std::size_t i = 0; i < m; ++i) out.wh(i, p) = w(i, p) * w_scale;
        for (std::size_t j = 0; j < n; ++j) out.wh(m + j, p) = h(p, j) * h_scale;
    }
    return out;
}

}  // namespace

BalancedFeatures balance(const DenseMatrix& w, const DenseMatrix& h) {
    const ComponentNorms norms = component_norms(w, h);
    for (std::size_t p = 0; p < norms.w.size(); ++p) {
        if (!(norms.w[p] > 0.0)) {
            throw DegenerateComponentError(
                "balance: column " + std::to_string(p) + " of W is zero", p);
        }
        if (!(norms.h[p] > 0.0)) {
            throw DegenerateComponentError("balance: row " + std::to_string(p) + " of H is zero",
                                           p);
        }
    }
    return assemble_balanced(w, h, norms);
}

BalancedFeatures balance_guarded(const DenseMatrix& w, const DenseMatrix& h, double norm_floor) {
    ComponentNorms norms = component_norms(w, h);
    for (double& v : norms.w) v = std::max(v, norm_floor);
    for (double& v : norms.h) v = std::max(v, norm_floor);
    return assemble_balanced(w, h, norms);
}

DenseMatrix fem(const BalancedFeatures& a, const BalancedFeatures& b) {
    require_same_shape(a.wh, b.wh, "fem");
    if (a.m_rows != b.m_rows) throw ShapeError("fem: W/H split points differ");
    const std::size_t k = a.rank();
    DenseMatrix out(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < a.wh.rows(); ++r) {
                const double d = a.wh(r, i) - b.wh(r, j);
                acc += d * d;
            }
            out(i, j) = std::sqrt(acc);
        }
    }
    return out;
}

Assignment hungarian(const DenseMatrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw ShapeError("hungarian: cost matrix must be square, got " + cost.shape_string());
    }
    if (!cost.all_finite()) throw PreconditionError("hungarian: cost matrix has non-finite entries");
    const std::size_t n = cost.rows();
    Assignment result;
    if (n == 0) return result;

    // Shortest augmenting paths with potentials; index 0 is a virtual column.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[col0] = true;
            const std::size_t r0 = match[col0];
            double delta = kInf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= n; ++c) {
                if (used[c]) continue;
                const double reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if (reduced < minv[c]) {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if (minv[c] < delta) {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for (std::size_t c = 0; c <= n; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }

    result.perm.assign(n, 0);
    for (std::size_t c = 1; c <= n; ++c) result.perm[match[c] - 1] = c - 1;
    for (std::size_t i = 0; i < n; ++i) result.total_cost += cost(i, result.perm[i]);
    return result;
}

DenseMatrix permute_columns(const DenseMatrix& cols, const std::vector<std::size_t>& perm) {
    if (perm.size() != cols.cols()) throw ShapeError("permute_columns: permutation length");
    DenseMatrix out(cols.rows(), cols.cols());
    for (std::size_t r = 0; r < cols.rows(); ++r)
        for (std::size_t c = 0; c < cols.cols(); ++c) out(r, perm[c]) = cols(r, c);
    return out;
}

FeatureErrorResult fe_loss(const BalancedFeatures& nmf, const BalancedFeatures& ref) {
    DenseMatrix cost = fem(nmf, ref);
    for (double& v : cost.values()) v *= v;
    FeatureErrorResult out;
    out.assignment = hungarian(cost);
    const double ref_norm = frobenius_norm(ref.wh);
    const double diff = frobenius_norm(permute_columns(nmf.wh, out.assignment.perm) - ref.wh);
    out.fe = ref_norm > 0.0 ? diff / ref_norm : diff;
    return out;
}

double w_only_error(const DenseMatrix& w_nmf, const DenseMatrix& w_ref,
                    const Assignment& assignment) {
    require_same_shape(w_nmf, w_ref, "w_only_error");
    const double ref_norm = frobenius_norm(w_ref);
    const double diff = frobenius_norm(permute_columns(w_nmf, assignment.perm) - w_ref);
    return ref_norm > 0.0 ? diff / ref_norm : diff;
}

FactorPair fe_loss_gradient(const DenseMatrix& w, const DenseMatrix& h,
                            const BalancedFeatures& ref, const Assignment& assignment) {
    const BalancedFeatures nmf = balance(w, h);
    require_same_shape(nmf.wh, ref.wh, "fe_loss_gradient");
    const std::size_t m = w.rows(), n = h.cols(), k = w.cols();
    FactorPair grad{DenseMatrix(m, k), DenseMatrix(k, n)};

    const DenseMatrix diff = permute_columns(nmf.wh, assignment.perm) - ref.wh;
    const double diff_norm = frobenius_norm(diff);
    const double ref_norm = frobenius_norm(ref.wh);
    if (diff_norm == 0.0) return grad;
    const double scale = 1.0 / (diff_norm * (ref_norm > 0.0 ? ref_norm : 1.0));

    const ComponentNorms norms = component_norms(w, h);
    std::vector<double> g_w(m), g_h(n);
    for (std::size_t p = 0; p < k; ++p) {
        const std::size_t q = assignment.perm[p];
        for (std::size_t i = 0; i < m; ++i) g_w[i] = diff(i, q) * scale;
        for (std::size_t j = 0; j < n; ++j) g_h[j] = diff(m + j, q) * scale;

        // W̄ = W·r and H̄ = H/r with r = √(‖H‖/‖W‖).
        const double a = norms.w[p], b = norms.h[p];
        const double r = std::sqrt(b / a);
        double gw_dot_w = 0.0, gh_dot_h = 0.0;
        for (std::size_t i = 0; i < m; ++i) gw_dot_w += g_w[i] * w(i, p);
        for (std::size_t j = 0; j < n; ++j) gh_dot_h += g_h[j] * h(p, j);
        const double cot_r = gw_dot_w - gh_dot_h / (r * r);
        const double w_coeff = -0.5 * r / (a * a) * cot_r;
        const double h_coeff = 0.5 * r / (b * b) * cot_r;
        for (std::size_t i = 0; i < m; ++i) grad.w(i, p) = g_w[i] * r + w_coeff * w(i, p);
        for (std::size_t j = 0; j < n; ++j) grad.h(p, j) = g_h[j] / r + h_coeff * h(p, j);
    }
    return grad;
}

}  // namespace lafa
