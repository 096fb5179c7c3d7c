#ifndef LAFA_OBJECTIVE_HPP
#define LAFA_OBJECTIVE_HPP

#include <functional>
#include <optional>
#include <string_view>

#include "lafa/feature_error.hpp"
#include "lafa/matrix.hpp"
#include "lafa/nmf.hpp"

namespace lafa {

/// Value and first-order sensitivities of a loss evaluated on the final NMF
/// iterate: partials with respect to W and H, plus any direct dependence on X.
struct TerminalLoss {
    double value = 0.0;
    FactorPair grad;
    DenseMatrix grad_x_direct;  ///< empty when the loss does not read X directly
    std::optional<Assignment> assignment;
};

/// Loss applied to (X, W, H) at the end of the factorization.
using TerminalObjective =
    std::function<TerminalLoss(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h)>;

/// Feature error against `ref`; the optimal assignment is found at the given
/// (W, H) and frozen for the gradient.
TerminalObjective feature_error_objective(BalancedFeatures ref);

/// Absolute reconstruction error ‖X − WH‖_F.
TerminalObjective reconstruction_objective();

enum class Objective { feature_error, reconstruction };

std::string_view to_string(Objective objective);

}  // namespace lafa

#endif  // LAFA_OBJECTIVE_HPP
