#include "lafa/grad_backprop.hpp"

#include <algorithm>
#include <cmath>

#include "lafa/errors.hpp"

namespace lafa {

std::size_t mu_step_workspace_bytes(std::size_t m, std::size_t n, std::size_t k) {
    // Hᵀ, the new W, (WᵀQ)ᵀ, the new H, two length-k sums.
    return doubles_bytes(3 * n * k + m * k + 2 * k);
}

std::size_t mu_step_vjp_workspace_bytes(std::size_t m, std::size_t n, std::size_t k) {
    // Hᵀ, S = RHᵀ, the new W, Uᵀ, Ūᵀ, H̄ᵀ, one row of W̄′, and five length-k vectors,
    // plus the returned W and H cotangents.
    return doubles_bytes(4 * n * k + 2 * m * k + 6 * k) + doubles_bytes(m * k + k * n);
}

IterateTape record_tape(const DenseMatrix& x, const DenseMatrix& w0, const DenseMatrix& h0,
                        std::size_t steps, double guard) {
    check_factor_shapes(x, w0, h0, "record_tape");
    for (double v : w0.values())
        if (!(v > 0.0)) throw PreconditionError("record_tape: w0 must be strictly positive");
    for (double v : h0.values())
        if (!(v > 0.0)) throw PreconditionError("record_tape: h0 must be strictly positive");

    MemoryLedger ledger;
    IterateTape tape;
    tape.x_ref = x;
    tape.guard = guard;
    tape.checkpoints.reserve(steps + 1);
    tape.checkpoints.push_back({w0, h0});
    const std::size_t checkpoint_bytes = w0.bytes() + h0.bytes();
    ledger.acquire(checkpoint_bytes);
    const std::size_t workspace = mu_step_workspace_bytes(x.rows(), x.cols(), w0.cols());
    for (std::size_t t = 0; t < steps; ++t) {
        const FactorPair& cur = tape.checkpoints.back();
        {
            LedgerHold scratch(ledger, workspace);
            FactorPair next = mu_step(x, cur.w, cur.h, guard);
            tape.checkpoints.push_back(std::move(next));
        }
        ledger.acquire(checkpoint_bytes);
    }
    tape.bytes_peak = ledger.peak();
    return tape;
}

MuStepLinearization::MuStepLinearization(const DenseMatrix& x, const DenseMatrix& w,
                                         const DenseMatrix& h, double guard)
    : x_(&x), w_(&w), h_(&h), guard_(guard) {
    check_factor_shapes(x, w, h, "mu_step_vjp");
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();

    // W′ = W ⊙ S / c with S = (X ⊘ WH)Hᵀ and c = row sums of H;
    // H′ = H ⊙ U / d with U = W′ᵀ(X ⊘ W′H) and d = column sums of W′.
    ht_ = transpose(h);
    c_.assign(k, 0.0);
    for (std::size_t p = 0; p < k; ++p)
        for (double v : h.row(p)) c_[p] += v;

    s_ = DenseMatrix(m, k);
    for (std::size_t i = 0; i < m; ++i) {
        const double* wi = w.row(i).data();
        double* si = s_.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht_.row(j).data();
            double a = 0.0;
            for (std::size_t p = 0; p < k; ++p) a += wi[p] * hj[p];
            if (a <= guard) ++guard_active_;
            const double r = x(i, j) / std::max(a, guard);
            for (std::size_t p = 0; p < k; ++p) si[p] += r * hj[p];
        }
    }
    wn_ = DenseMatrix(m, k);
    d_.assign(k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            wn_(i, p) = w(i, p) * s_(i, p) / std::max(c_[p], guard);
            d_[p] += wn_(i, p);
        }
    }
    ut_ = DenseMatrix(n, k);
    for (std::size_t i = 0; i < m; ++i) {
        const double* wi = wn_.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht_.row(j).data();
            double b = 0.0;
            for (std::size_t p = 0; p < k; ++p) b += wi[p] * hj[p];
            if (b <= guard) ++guard_active_;
            const double q = x(i, j) / std::max(b, guard);
            double* uj = ut_.row(j).data();
            for (std::size_t p = 0; p < k; ++p) uj[p] += wi[p] * q;
        }
    }
}

FactorPair MuStepLinearization::vjp(const DenseMatrix& cot_w_next, const DenseMatrix& cot_h_next,
                                    DenseMatrix* cot_x_acc) const {
    const DenseMatrix& x = *x_;
    const DenseMatrix& w = *w_;
    const DenseMatrix& h = *h_;
    const double guard = guard_;
    require_same_shape(cot_w_next, w, "mu_step_vjp (w cotangent)");
    require_same_shape(cot_h_next, h, "mu_step_vjp (h cotangent)");
    if (cot_x_acc) require_same_shape(*cot_x_acc, x, "mu_step_vjp (x cotangent)");
    const std::size_t m = x.rows(), n = x.cols(), k = w.cols();

    // Reverse through the H update.
    DenseMatrix hbar_t(n, k);  // H̄ᵀ
    DenseMatrix ubar_t(n, k);  // Ūᵀ
    std::vector<double> dbar(k, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double dg = std::max(d_[p], guard);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double g = cot_h_next(p, j);
            hbar_t(j, p) = g * ut_(j, p) / dg;
            ubar_t(j, p) = g * h(p, j) / dg;
            acc += g * h(p, j) * ut_(j, p);
        }
        dbar[p] = d_[p] > guard ? -acc / (dg * dg) : 0.0;
    }

    FactorPair cot{DenseMatrix(m, k), DenseMatrix(k, n)};
    std::vector<double> wnbar(k), sbar(k);
    std::vector<double> cbar(k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* wni = wn_.row(i).data();
        const double* wi = w.row(i).data();
        const double* xi = x.row(i).data();
        double* cxi = cot_x_acc ? cot_x_acc->row(i).data() : nullptr;
        for (std::size_t p = 0; p < k; ++p) wnbar[p] = cot_w_next(i, p) + dbar[p];

        // Q = X ⊘ B with B = W′H.
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht_.row(j).data();
            const double* ubj = ubar_t.row(j).data();
            double b = 0.0, qbar = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                b += wni[p] * hj[p];
                qbar += wni[p] * ubj[p];
            }
            const double bg = std::max(b, guard);
            const double q = xi[j] / bg;
            if (cxi) cxi[j] += qbar / bg;
            const double bbar = b > guard ? -qbar * q / bg : 0.0;
            double* hbj = hbar_t.row(j).data();
            for (std::size_t p = 0; p < k; ++p) {
                wnbar[p] += q * ubj[p] + bbar * hj[p];
                hbj[p] += wni[p] * bbar;
            }
        }

        // Reverse through the W update for this row.
        double* wbar_i = cot.w.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double cg = std::max(c_[p], guard);
            wbar_i[p] = wnbar[p] * s_(i, p) / cg;
            sbar[p] = wnbar[p] * wi[p] / cg;
            if (c_[p] > guard) cbar[p] -= wnbar[p] * wi[p] * s_(i, p) / (cg * cg);
        }
        // R = X ⊘ A with A = WH.
        for (std::size_t j = 0; j < n; ++j) {
            const double* hj = ht_.row(j).data();
            double a = 0.0, rbar = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                a += wi[p] * hj[p];
                rbar += sbar[p] * hj[p];
            }
            const double ag = std::max(a, guard);
            const double r = xi[j] / ag;
            if (cxi) cxi[j] += rbar / ag;
            const double abar = a > guard ? -rbar * r / ag : 0.0;
            double* hbj = hbar_t.row(j).data();
            for (std::size_t p = 0; p < k; ++p) {
                hbj[p] += sbar[p] * r + wi[p] * abar;
                wbar_i[p] += abar * hj[p];
            }
        }
    }
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) cot.h(p, j) = hbar_t(j, p) + cbar[p];
    return cot;
}

FactorPair mu_step_vjp_accumulate(const DenseMatrix& x, const DenseMatrix& w,
                                  const DenseMatrix& h, const DenseMatrix& cot_w_next,
                                  const DenseMatrix& cot_h_next, double guard,
                                  DenseMatrix* cot_x_acc) {
    return MuStepLinearization(x, w, h, guard).vjp(cot_w_next, cot_h_next, cot_x_acc);
}

StepCotangents mu_step_vjp(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                           const DenseMatrix& cot_w_next, const DenseMatrix& cot_h_next,
                           double guard) {
    DenseMatrix cot_x(x.rows(), x.cols());
    FactorPair cot = mu_step_vjp_accumulate(x, w, h, cot_w_next, cot_h_next, guard, &cot_x);
    return {std::move(cot_x), std::move(cot.w), std::move(cot.h)};
}

GradientReport backprop_gradient(const DenseMatrix& x, const DenseMatrix& w0,
                                 const DenseMatrix& h0, std::size_t steps,
                                 const TerminalObjective& objective, double guard) {
    const auto start = std::chrono::steady_clock::now();
    if (steps < 1) throw PreconditionError("backprop_gradient: needs at least one NMF step");
    const IterateTape tape = record_tape(x, w0, h0, steps, guard);
    const std::size_t m = x.rows(), n = x.cols(), k = w0.cols();

    MemoryLedger ledger;
    const std::size_t tape_bytes = tape.checkpoints.size() * (w0.bytes() + h0.bytes());
    ledger.acquire(tape_bytes);
    // Carry over the forward pass high-water mark (full tape plus one step's scratch).
    { LedgerHold forward(ledger, tape.bytes_peak - std::min(tape.bytes_peak, tape_bytes)); }

    const FactorPair& last = tape.final_iterate();
    TerminalLoss terminal = objective(x, last.w, last.h);

    GradientReport report;
    report.loss_value = terminal.value;
    report.assignment = terminal.assignment;
    report.grad_x = terminal.grad_x_direct.empty() ? DenseMatrix(m, n)
                                                   : std::move(terminal.grad_x_direct);
    LedgerHold grad_hold(ledger, report.grad_x.bytes());
    LedgerHold cot_hold(ledger, doubles_bytes((m + n) * k));

    FactorPair cot = std::move(terminal.grad);
    {
        LedgerHold vjp_hold(ledger, mu_step_vjp_workspace_bytes(m, n, k));
        for (std::size_t t = steps; t-- > 0;) {
            const FactorPair& in = tape.checkpoints[t];
            cot = mu_step_vjp_accumulate(x, in.w, in.h, cot.w, cot.h, guard, &report.grad_x);
        }
    }
    if (!report.grad_x.all_finite())
        throw std::runtime_error("backprop_gradient: non-finite gradient");
    report.bytes_peak = ledger.peak();
    report.wall_time = std::chrono::steady_clock::now() - start;
    return report;
}

GradientReport backprop_gradient(const DenseMatrix& x, const DenseMatrix& w0,
                                 const DenseMatrix& h0, std::size_t steps,
                                 const BalancedFeatures& ref, double guard) {
    return backprop_gradient(x, w0, h0, steps, feature_error_objective(ref), guard);
}

}  // namespace lafa
