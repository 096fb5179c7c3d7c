#ifndef LAFA_GRAD_IMPLICIT_HPP
#define LAFA_GRAD_IMPLICIT_HPP

#include <chrono>
#include <cstddef>
#include <optional>

#include "lafa/feature_error.hpp"
#include "lafa/matrix.hpp"
#include "lafa/nmf.hpp"
#include "lafa/objective.hpp"

namespace lafa {

/// Partial derivatives of one mu_step (W then H) over flattened coordinates.
///
/// Flattening: W row-major (index i·k + p) first, then H row-major
/// (index (M·k) + p·N + j); X row-major (index i·N + j). Row r of each block
/// is the gradient of output coordinate r. The H-output rows include the
/// dependence through the updated W.
struct JacobianBlocks {
    DenseMatrix j_ww;  ///< Mk × Mk
    DenseMatrix j_wh;  ///< Mk × kN
    DenseMatrix j_hw;  ///< kN × Mk
    DenseMatrix j_hh;  ///< kN × kN
    DenseMatrix j_wx;  ///< Mk × MN (empty unless requested)
    DenseMatrix j_hx;  ///< kN × MN (empty unless requested)
    /// Entries of WH or W′H at or below the guard (their derivatives are dropped).
    std::size_t guard_active = 0;

    DenseMatrix j_y() const;  ///< [[J_WW, J_WH], [J_HW, J_HH]]
    DenseMatrix j_x() const;  ///< [[J_WX], [J_HX]]
};

/// Assembles the blocks row by row from unit-cotangent VJPs of mu_step, which
/// are exact. When `with_jx` is false the two X blocks are left empty.
JacobianBlocks assemble_jacobians(const DenseMatrix& x, const DenseMatrix& w,
                                  const DenseMatrix& h, double guard = kDefaultGuard,
                                  bool with_jx = true);

/// Max-abs entry change of one mu_step from (w, h).
double fixed_point_residual(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                            double guard = kDefaultGuard);

enum class JxMode {
    materialize,  ///< build J_x and contract explicitly
    jx_free,      ///< contract through one mu_step VJP; J_x is never formed
};

struct ImplicitOptions {
    double guard = kDefaultGuard;
    JxMode mode = JxMode::jx_free;
    /// Largest accepted fixed_point_residual of the model.
    double fixed_point_tol = 1e-6;
    /// Adjoint residuals above this are flagged in the report.
    double residual_tol = 1e-8;
    /// A refactorization direction t counts as null when ‖(J_y − I)t‖ ≤ null_tol.
    double null_tol = 1e-8;
};

struct ImplicitGradientReport {
    DenseMatrix grad_x;
    double loss_value = 0.0;
    /// ‖(J_y − I)ᵀv + g′‖ / ‖g′‖, where g′ is g with its gauge component removed.
    double solve_residual = 0.0;
    /// Number of null refactorization directions that were gauge-fixed.
    std::size_t gauge_rank = 0;
    /// ‖g − g′‖ / ‖g‖: the part of the loss gradient along those directions.
    double dropped_fraction = 0.0;
    bool residual_flagged = false;
    double fixed_point_residual = 0.0;
    std::size_t bytes_peak = 0;
    std::chrono::duration<double> wall_time{};
    std::optional<Assignment> assignment;
};

/// ∇_X of a terminal objective at a converged factorization via the implicit
/// function theorem on the fixed point (W, H) = mu_step(X, W, H).
///
/// Every (WA, A⁻¹H) that stays non-negative has the same product WH, so at
/// an interior fixed point (J_y − I) is singular along the refactorization
/// tangents (WE, −EH), E ∈ ℝ^{k×k}; at a boundary fixed point only some of
/// them (at least the k column scalings) survive. With T̂ an orthonormal basis
/// of the tangents that are numerically null, B = (J_y − I)ᵀ + T̂T̂ᵀ and
/// U = B⁻¹T̂ (which spans the null space of (J_y − I)ᵀ), the gradient is
/// projected as g′ = g − U(T̂ᵀg) and B v = −g′ is solved. The removed part is
/// annihilated by J_xᵀ. Scale-invariant objectives have no scaling component
/// in g; any mixing component is the dropped_fraction of the report. Along
/// mixing directions the limit of the iteration depends on its trajectory,
/// which no fixed-point equation sees.
///
/// Throws PreconditionError when the model is not at a fixed point and
/// SingularMatrixError when the gauge-fixed system is still singular (a
/// degenerate or otherwise non-isolated fixed point).
ImplicitGradientReport implicit_gradient(const DenseMatrix& x, const NmfModel& model,
                                         const TerminalObjective& objective,
                                         const ImplicitOptions& options = {});

ImplicitGradientReport implicit_gradient(const DenseMatrix& x, const NmfModel& model,
                                         const BalancedFeatures& ref, double guard,
                                         JxMode mode);

/// Bytes implicit_gradient holds at its high-water mark for an M×N, rank-k problem.
std::size_t implicit_gradient_bytes(std::size_t m, std::size_t n, std::size_t k, JxMode mode);

}  // namespace lafa

#endif  // LAFA_GRAD_IMPLICIT_HPP
