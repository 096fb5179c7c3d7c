#include "lafa/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lafa/errors.hpp"

namespace lafa {

void check_factor_shapes(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                         const char* what) {
    if (w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows()) {
        throw ShapeError(std::string(what) + ": cannot factor " + x.shape_string() + " as " +
                         w.shape_string() + " * " + h.shape_string());
    }
}

namespace {

// x·log(x/q) − x + q = q·φ(d) with d = (x − q)/q and φ(d) = (1 + d)·log(1 + d) − d.
// The direct form cancels near d = 0, so φ is summed from its series there.
double kl_term(double xv, double a, double guard) {
    if (xv <= 0.0) return a;
    const double q = std::max(a, guard);
    const double d = (xv - q) / q;
    if (std::abs(d) < 0.05) {
        double power = d * d, phi = 0.0;
        for (int n = 2; n < 16; ++n) {
            phi += (n % 2 == 0 ? power : -power) / static_cast<double>(n * (n - 1));
            power *= d;
        }
        return q * phi + (a - q);
    }
    return a - xv + xv * std::log(xv / q);
}

}  // namespace

double kl_divergence(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                     double guard) {
    check_factor_shapes(x, w, h, "kl_divergence");
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* wi = w.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            double a = 0.0;
            for (std::size_t p = 0; p < k; ++p) a += wi[p] * h(p, j);
            total += kl_term(x(i, j), a, guard);
        }
    }
    return total;
}

FactorPair mu_step(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                   double guard) {
    check_factor_shapes(x, w, h, "mu_step");
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();

    // W update: W ⊙ ((X ⊘ WH) Hᵀ) ⊘ (1 Hᵀ); (1Hᵀ)_ij is the j-th row sum of H.
    std::vector<double> h_rowsum(k, 0.0);
    for (std::size_t p = 0; p < k; ++p)
        for (double v : h.row(p)) h_rowsum[p] += v;

    // Hᵀ keeps the per-entry k-loops contiguous.
    const DenseMatrix ht = transpose(h);
    DenseMatrix w_next(m, k);
    std::vector<double> numer(k);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(numer.begin(), numer.end(), 0.0);
        const double* wi = w.row(i).data();
        const double* xi = x.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht.row(j).data();
            double a = 0.0;
            for (std::size_t p = 0; p < k; ++p) a += wi[p] * hj[p];
            const double ratio = xi[j] / std::max(a, guard);
            for (std::size_t p = 0; p < k; ++p) numer[p] += ratio * hj[p];
        }
        for (std::size_t p = 0; p < k; ++p)
            w_next(i, p) = wi[p] * numer[p] / std::max(h_rowsum[p], guard);
    }

    // H update with the new W: H ⊙ (Wᵀ (X ⊘ WH)) ⊘ (Wᵀ 1).
    std::vector<double> w_colsum(k, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) w_colsum[p] += w_next(i, p);

    DenseMatrix ut(n, k);  // (Wᵀ (X ⊘ WH))ᵀ
    for (std::size_t i = 0; i < m; ++i) {
        const double* wi = w_next.row(i).data();
        const double* xi = x.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht.row(j).data();
            double* uj = ut.row(j).data();
            double b = 0.0;
            for (std::size_t p = 0; p < k; ++p) b += wi[p] * hj[p];
            const double ratio = xi[j] / std::max(b, guard);
            for (std::size_t p = 0; p < k; ++p) uj[p] += wi[p] * ratio;
        }
    }
    DenseMatrix h_next(k, n);
    for (std::size_t p = 0; p < k; ++p) {
        const double denom = std::max(w_colsum[p], guard);
        for (std::size_t j = 0; j < n; ++j) h_next(p, j) = h(p, j) * ut(j, p) / denom;
    }
    return {std::move(w_next), std::move(h_next)};
}

namespace {

void require_strictly_positive(const DenseMatrix& a, const char* name) {
    for (double v : a.values()) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw PreconditionError(std::string("run_nmf: ") + name +
                                    " must be strictly positive and finite");
        }
    }
}

void require_nonnegative(const DenseMatrix& a, const char* what) {
    for (double v : a.values()) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw PreconditionError(std::string(what) + ": input must be finite and non-negative");
        }
    }
}

double pair_change(const FactorPair& prev, const FactorPair& next) {
    double diff = 0.0, base = 0.0;
    auto accumulate = [&](const DenseMatrix& a, const DenseMatrix& b) {
        auto av = a.values();
        auto bv = b.values();
        for (std::size_t i = 0; i < av.size(); ++i) {
            diff += (bv[i] - av[i]) * (bv[i] - av[i]);
            base += av[i] * av[i];
        }
    };
    accumulate(prev.w, next.w);
    accumulate(prev.h, next.h);
    return base > 0.0 ? std::sqrt(diff / base) : std::sqrt(diff);
}

}  // namespace

NmfModel run_nmf(const DenseMatrix& x, const DenseMatrix& w_init, const DenseMatrix& h_init,
                 const NmfConfig& cfg) {
    check_factor_shapes(x, w_init, h_init, "run_nmf");
    if (cfg.max_iterations < 1) throw PreconditionError("run_nmf: max_iterations must be >= 1");
    if (!(cfg.epsilon_guard > 0.0)) throw PreconditionError("run_nmf: epsilon_guard must be > 0");
    require_nonnegative(x, "run_nmf");
    require_strictly_positive(w_init, "w_init");
    require_strictly_positive(h_init, "h_init");

    const std::size_t record_every = std::max<std::size_t>(cfg.record_every, 1);
    NmfModel model;
    model.rank = w_init.cols();
    FactorPair current{w_init, h_init};
    model.divergence_history.push_back(kl_divergence(x, current.w, current.h, cfg.epsilon_guard));
    model.history_iterations.push_back(0);

    std::size_t t = 0;
    while (t < cfg.max_iterations) {
        FactorPair next = mu_step(x, current.w, current.h, cfg.epsilon_guard);
        ++t;
        const bool stop = cfg.rel_change_tol && pair_change(current, next) < *cfg.rel_change_tol;
        current = std::move(next);
        if (stop || t == cfg.max_iterations || t % record_every == 0) {
            model.divergence_history.push_back(
                kl_divergence(x, current.w, current.h, cfg.epsilon_guard));
            model.history_iterations.push_back(t);
        }
        if (stop) break;
    }
    model.iterations_run = t;
    model.w = std::move(current.w);
    model.h = std::move(current.h);
    return model;
}

FactorPair seed_factors(Rng& rng, std::size_t m, std::size_t n, std::size_t k) {
    if (k < 1) throw PreconditionError("seed_factors: rank must be >= 1");
    // 1 − U[0,1) lies in (0, 1].
    auto draw = [&](std::size_t r, std::size_t c) {
        DenseMatrix out(r, c);
        for (double& v : out.values()) v = 1.0 - rng.uniform();
        return out;
    };
    DenseMatrix w = draw(m, k);
    DenseMatrix h = draw(k, n);
    return {std::move(w), std::move(h)};
}

ReconstructionError reconstruction_error(const DenseMatrix& x, const DenseMatrix& w,
                                         const DenseMatrix& h) {
    check_factor_shapes(x, w, h, "reconstruction_error");
    const DenseMatrix residual = x - matmul(w, h);
    const double abs_err = frobenius_norm(residual);
    const double scale = frobenius_norm(x);
    return {abs_err, scale > 0.0 ? abs_err / scale : 0.0};
}

ReconstructionError reconstruction_error(const DenseMatrix& x, const NmfModel& model) {
    return reconstruction_error(x, model.w, model.h);
}

}  // namespace lafa
