#include "lafa/objective.hpp"

#include <cmath>

namespace lafa {

TerminalObjective feature_error_objective(BalancedFeatures ref) {
    return [ref = std::move(ref)](const DenseMatrix&, const DenseMatrix& w, const DenseMatrix& h) {
        const FeatureErrorResult fe = fe_loss(balance(w, h), ref);
        TerminalLoss out;
        out.value = fe.fe;
        out.grad = fe_loss_gradient(w, h, ref, fe.assignment);
        out.assignment = fe.assignment;
        return out;
    };
}

TerminalObjective reconstruction_objective() {
    return [](const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h) {
        DenseMatrix residual = x - matmul(w, h);
        TerminalLoss out;
        out.value = frobenius_norm(residual);
        if (out.value == 0.0) {
            out.grad = {DenseMatrix(w.rows(), w.cols()), DenseMatrix(h.rows(), h.cols())};
            out.grad_x_direct = DenseMatrix(x.rows(), x.cols());
            return out;
        }
        residual = (1.0 / out.value) * residual;
        // L = ‖E‖ with E = X − WH: ∂L/∂X = E/L, ∂L/∂W = −(E/L)Hᵀ, ∂L/∂H = −Wᵀ(E/L).
        out.grad.w = -1.0 * matmul_nt(residual, h);
        out.grad.h = -1.0 * matmul_tn(w, residual);
        out.grad_x_direct = std::move(residual);
        return out;
    };
}

std::string_view to_string(Objective objective) {
    switch (objective) {
        case Objective::feature_error: return "feature-error";
        case Objective::reconstruction: return "reconstruction";
    }
    return "unknown";
}

}  // namespace lafa
