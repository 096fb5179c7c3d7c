#include "lafa/grad_implicit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lafa/errors.hpp"
#include "lafa/grad_backprop.hpp"
#include "lafa/memory.hpp"

namespace lafa {

namespace {

/// Calls `sink(r, cot, cot_x)` with the gradient of output coordinate r of one
/// mu_step, for r over the flattened (W′, H′) outputs. cot_x is null unless
/// `with_x` is set.
template <class Sink>
void for_each_jacobian_row(const MuStepLinearization& lin, std::size_t m, std::size_t n,
                           std::size_t k, bool with_x, Sink&& sink) {
    DenseMatrix unit_w(m, k), unit_h(k, n);
    DenseMatrix cot_x(with_x ? m : 0, with_x ? n : 0);
    auto run = [&](DenseMatrix& unit, std::size_t local, std::size_t r) {
        unit.values()[local] = 1.0;
        if (with_x) std::fill(cot_x.values().begin(), cot_x.values().end(), 0.0);
        const FactorPair cot = lin.vjp(unit_w, unit_h, with_x ? &cot_x : nullptr);
        unit.values()[local] = 0.0;
        sink(r, cot, with_x ? &cot_x : nullptr);
    };
    for (std::size_t r = 0; r < m * k; ++r) run(unit_w, r, r);
    for (std::size_t r = 0; r < k * n; ++r) run(unit_h, r, m * k + r);
}

void copy_into_row(DenseMatrix& dst, std::size_t row, std::size_t offset,
                   std::span<const double> src) {
    std::copy(src.begin(), src.end(), dst.row(row).begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

DenseMatrix JacobianBlocks::j_y() const {
    const std::size_t mk = j_ww.rows(), kn = j_hh.rows();
    DenseMatrix out(mk + kn, mk + kn);
    for (std::size_t r = 0; r < mk; ++r) {
        copy_into_row(out, r, 0, j_ww.row(r));
        copy_into_row(out, r, mk, j_wh.row(r));
    }
    for (std::size_t r = 0; r < kn; ++r) {
        copy_into_row(out, mk + r, 0, j_hw.row(r));
        copy_into_row(out, mk + r, mk, j_hh.row(r));
    }
    return out;
}

DenseMatrix JacobianBlocks::j_x() const {
    if (j_wx.empty() && j_hx.empty()) return {};
    DenseMatrix out(j_wx.rows() + j_hx.rows(), j_wx.cols());
    for (std::size_t r = 0; r < j_wx.rows(); ++r) copy_into_row(out, r, 0, j_wx.row(r));
    for (std::size_t r = 0; r < j_hx.rows(); ++r)
        copy_into_row(out, j_wx.rows() + r, 0, j_hx.row(r));
    return out;
}

JacobianBlocks assemble_jacobians(const DenseMatrix& x, const DenseMatrix& w,
                                  const DenseMatrix& h, double guard, bool with_jx) {
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();
    const MuStepLinearization lin(x, w, h, guard);
    const std::size_t mk = m * k, kn = k * n;
    JacobianBlocks out;
    out.j_ww = DenseMatrix(mk, mk);
    out.j_wh = DenseMatrix(mk, kn);
    out.j_hw = DenseMatrix(kn, mk);
    out.j_hh = DenseMatrix(kn, kn);
    if (with_jx) {
        out.j_wx = DenseMatrix(mk, m * n);
        out.j_hx = DenseMatrix(kn, m * n);
    }
    out.guard_active = lin.guard_active();
    for_each_jacobian_row(lin, m, n, k, with_jx,
                          [&](std::size_t r, const FactorPair& cot, const DenseMatrix* cot_x) {
                              const bool w_row = r < mk;
                              const std::size_t local = w_row ? r : r - mk;
                              copy_into_row(w_row ? out.j_ww : out.j_hw, local, 0, cot.w.values());
                              copy_into_row(w_row ? out.j_wh : out.j_hh, local, 0, cot.h.values());
                              if (cot_x)
                                  copy_into_row(w_row ? out.j_wx : out.j_hx, local, 0,
                                                cot_x->values());
                          });
    return out;
}

double fixed_point_residual(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                            double guard) {
    const FactorPair next = mu_step(x, w, h, guard);
    return std::max(max_abs_diff(next.w, w), max_abs_diff(next.h, h));
}

std::size_t implicit_gradient_bytes(std::size_t m, std::size_t n, std::size_t k, JxMode mode) {
    const std::size_t ny = (m + n) * k;
    std::size_t bytes = doubles_bytes(ny)                         // g
                        + mu_step_vjp_workspace_bytes(m, n, k)    // linearization + one VJP
                        + doubles_bytes(ny * ny)                  // J_y
                        + doubles_bytes(4 * ny * k * k)           // gauge basis, its image, T̂ and U
                        + doubles_bytes(2 * ny * ny)              // gauge-fixed system and its LU
                        + doubles_bytes(2 * ny)                   // rhs and solution v
                        + doubles_bytes(m * n);                   // G
    if (mode == JxMode::materialize) bytes += doubles_bytes(ny * m * n) + doubles_bytes(m * n);
    return bytes;
}

ImplicitGradientReport implicit_gradient(const DenseMatrix& x, const NmfModel& model,
                                         const TerminalObjective& objective,
                                         const ImplicitOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const DenseMatrix& w = model.w;
    const DenseMatrix& h = model.h;
    check_factor_shapes(x, w, h, "implicit_gradient");
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();
    const std::size_t mk = m * k, ny = (m + n) * k;
    const bool materialize = options.mode == JxMode::materialize;

    ImplicitGradientReport report;
    report.fixed_point_residual = fixed_point_residual(x, w, h, options.guard);
    if (!(report.fixed_point_residual <= options.fixed_point_tol)) {
        std::ostringstream os;
        os << "implicit_gradient: model is not at a fixed point (one more update moves an entry by "
           << report.fixed_point_residual << ", tolerance " << options.fixed_point_tol << ")";
        throw PreconditionError(os.str());
    }

    MemoryLedger ledger;
    TerminalLoss terminal = objective(x, w, h);
    report.loss_value = terminal.value;
    report.assignment = terminal.assignment;

    std::vector<double> g(ny);
    std::copy(terminal.grad.w.values().begin(), terminal.grad.w.values().end(), g.begin());
    std::copy(terminal.grad.h.values().begin(), terminal.grad.h.values().end(),
              g.begin() + static_cast<std::ptrdiff_t>(mk));
    LedgerHold g_hold(ledger, doubles_bytes(ny));
    const double g_norm = frobenius_norm(g);

    const MuStepLinearization lin(x, w, h, options.guard);
    LedgerHold lin_hold(ledger, mu_step_vjp_workspace_bytes(m, n, k));

    DenseMatrix jy(ny, ny);
    LedgerHold jy_hold(ledger, jy.bytes());
    DenseMatrix jx(materialize ? ny : 0, materialize ? m * n : 0);
    LedgerHold jx_hold(ledger, jx.bytes());
    for_each_jacobian_row(lin, m, n, k, materialize,
                          [&](std::size_t r, const FactorPair& cot, const DenseMatrix* cot_x) {
                              copy_into_row(jy, r, 0, cot.w.values());
                              copy_into_row(jy, r, mk, cot.h.values());
                              if (cot_x) copy_into_row(jx, r, 0, cot_x->values());
                          });

    // Directions along which the fixed point can move without changing WH:
    // (W E, −E H) for every k×k E. Keep an orthonormal basis T̂ of those that
    // are numerically null for (J_y − I).
    DenseMatrix basis(ny, k * k);
    LedgerHold basis_hold(ledger, 2 * basis.bytes());  // the basis and its image
    LedgerHold u_hold(ledger, 2 * basis.bytes());      // T̂ and U, at most k² columns each
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
            const std::size_t col = p * k + q;
            for (std::size_t i = 0; i < m; ++i) basis(i * k + q, col) = w(i, p);
            for (std::size_t j = 0; j < n; ++j) basis(mk + p * n + j, col) = -h(q, j);
        }
    }
    orthogonalize_columns(basis);
    std::vector<double> norms(k * k);
    double largest = 0.0;
    for (std::size_t c = 0; c < k * k; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < ny; ++r) acc += basis(r, c) * basis(r, c);
        norms[c] = std::sqrt(acc);
        largest = std::max(largest, norms[c]);
    }
    for (std::size_t c = 0; c < k * k; ++c) {
        const double inv = norms[c] > 1e-12 * largest ? 1.0 / norms[c] : 0.0;
        for (std::size_t r = 0; r < ny; ++r) basis(r, c) *= inv;
    }
    DenseMatrix image = matmul(jy, basis) - basis;
    orthogonalize_columns(image, &basis);
    std::vector<std::size_t> gauge;
    for (std::size_t c = 0; c < k * k; ++c) {
        if (norms[c] <= 1e-12 * largest) continue;
        double acc = 0.0;
        for (std::size_t r = 0; r < ny; ++r) acc += image(r, c) * image(r, c);
        if (std::sqrt(acc) <= options.null_tol) gauge.push_back(c);
    }
    report.gauge_rank = gauge.size();

    // B = (J_y − I)ᵀ + T̂T̂ᵀ. U = B⁻¹T̂ spans the null space of (J_y − I)ᵀ with
    // T̂ᵀU = I, so g′ = g − U T̂ᵀg is the part of g the adjoint equation can
    // absorb. The dropped part lies in that null space, which J_xᵀ annihilates
    // because fixed points persist when x moves.
    DenseMatrix system(ny, ny);
    LedgerHold system_hold(ledger, 2 * system.bytes());  // the matrix and its LU copy
    for (std::size_t r = 0; r < ny; ++r)
        for (std::size_t c = 0; c < ny; ++c) system(r, c) = jy(c, r) - (r == c ? 1.0 : 0.0);
    for (std::size_t c : gauge)
        for (std::size_t r = 0; r < ny; ++r)
            for (std::size_t s2 = 0; s2 < ny; ++s2) system(r, s2) += basis(r, c) * basis(s2, c);

    auto solve = [&](const DenseMatrix& rhs) {
        try {
            return solve_linear(system, rhs);
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError(
                "implicit_gradient: (J_y - I) is singular outside the refactorization "
                "directions; the fixed point is degenerate or non-isolated (pivot " +
                    std::to_string(e.pivot()) + ")",
                e.pivot());
        }
    };

    if (!gauge.empty() && g_norm > 0.0) {
        DenseMatrix t_hat(ny, gauge.size());
        for (std::size_t c = 0; c < gauge.size(); ++c)
            for (std::size_t r = 0; r < ny; ++r) t_hat(r, c) = basis(r, gauge[c]);
        const DenseMatrix u = solve(t_hat);
        std::vector<double> coef(gauge.size(), 0.0);
        for (std::size_t c = 0; c < gauge.size(); ++c)
            for (std::size_t r = 0; r < ny; ++r) coef[c] += t_hat(r, c) * g[r];
        double dropped = 0.0;
        for (std::size_t r = 0; r < ny; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < gauge.size(); ++c) acc += u(r, c) * coef[c];
            g[r] -= acc;
            dropped += acc * acc;
        }
        report.dropped_fraction = std::sqrt(dropped) / g_norm;
    }

    DenseMatrix rhs(ny, 1);
    for (std::size_t r = 0; r < ny; ++r) rhs(r, 0) = -g[r];
    LedgerHold vec_hold(ledger, doubles_bytes(2 * ny));
    report.grad_x = terminal.grad_x_direct.empty() ? DenseMatrix(m, n)
                                                   : std::move(terminal.grad_x_direct);
    LedgerHold grad_hold(ledger, report.grad_x.bytes());
    LedgerHold contract_hold(ledger, materialize ? doubles_bytes(m * n) : 0);

    if (frobenius_norm(g) > 0.0) {
        const DenseMatrix v = solve(rhs);

        // Residual of the adjoint equation against the solvable part of g.
        double res = 0.0;
        for (std::size_t r = 0; r < ny; ++r) {
            double acc = g[r] - v(r, 0);
            for (std::size_t c = 0; c < ny; ++c) acc += jy(c, r) * v(c, 0);
            res += acc * acc;
        }
        const double solvable = frobenius_norm(g);
        report.solve_residual = solvable > 0.0 ? std::sqrt(res) / solvable : 0.0;

        if (materialize) {
            for (std::size_t r = 0; r < ny; ++r) {
                const double vr = v(r, 0);
                if (vr == 0.0) continue;
                const double* jr = jx.row(r).data();
                auto gx = report.grad_x.values();
                for (std::size_t c = 0; c < m * n; ++c) gx[c] += vr * jr[c];
            }
        } else {
            DenseMatrix v_w(m, k), v_h(k, n);
            for (std::size_t r = 0; r < mk; ++r) v_w.values()[r] = v(r, 0);
            for (std::size_t r = 0; r < k * n; ++r) v_h.values()[r] = v(mk + r, 0);
            lin.vjp(v_w, v_h, &report.grad_x);
        }
    }
    report.residual_flagged = report.solve_residual > options.residual_tol;
    if (!report.grad_x.all_finite())
        throw std::runtime_error("implicit_gradient: non-finite gradient");
    report.bytes_peak = ledger.peak();
    report.wall_time = std::chrono::steady_clock::now() - start;
    return report;
}

ImplicitGradientReport implicit_gradient(const DenseMatrix& x, const NmfModel& model,
                                         const BalancedFeatures& ref, double guard,
                                         JxMode mode) {
    ImplicitOptions options;
    options.guard = guard;
    options.mode = mode;
    return implicit_gradient(x, model, feature_error_objective(ref), options);
}

}  // namespace lafa
