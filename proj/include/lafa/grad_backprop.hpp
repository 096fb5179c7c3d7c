#ifndef LAFA_GRAD_BACKPROP_HPP
#define LAFA_GRAD_BACKPROP_HPP

#include <chrono>
#include <cstddef>
#include <optional>
#include <vector>

#include "lafa/feature_error.hpp"
#include "lafa/matrix.hpp"
#include "lafa/memory.hpp"
#include "lafa/nmf.hpp"
#include "lafa/objective.hpp"

namespace lafa {

/// Every iterate (W_t, H_t), t = 0..T, of one NMF run.
struct IterateTape {
    std::vector<FactorPair> checkpoints;
    DenseMatrix x_ref;
    double guard = kDefaultGuard;
    std::size_t bytes_peak = 0;

    std::size_t steps() const noexcept { return checkpoints.empty() ? 0 : checkpoints.size() - 1; }
    const FactorPair& final_iterate() const { return checkpoints.back(); }
};

struct StepCotangents {
    DenseMatrix x;  ///< M×N
    DenseMatrix w;  ///< M×k
    DenseMatrix h;  ///< k×N
};

struct GradientReport {
    DenseMatrix grad_x;
    double loss_value = 0.0;
    std::size_t bytes_peak = 0;
    std::chrono::duration<double> wall_time{};
    std::optional<Assignment> assignment;  ///< frozen permutation (feature-error objective)
};

/// Forward pass that keeps every iterate.
IterateTape record_tape(const DenseMatrix& x, const DenseMatrix& w0, const DenseMatrix& h0,
                        std::size_t steps, double guard = kDefaultGuard);

/// Vector-Jacobian product of one mu_step at input (w, h): given cotangents of
/// the step outputs (w′, h′), returns cotangents of (x, w, h). The H update
/// reads the updated W, so the w′ cotangent also collects the H-update path.
/// Denominators clamped by the guard contribute no derivative.
StepCotangents mu_step_vjp(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                           const DenseMatrix& cot_w_next, const DenseMatrix& cot_h_next,
                           double guard = kDefaultGuard);

/// Step internals (S = (X ⊘ WH)Hᵀ, the updated W, U = W′ᵀ(X ⊘ W′H) and the
/// normalizing sums) recomputed once from a checkpoint so that any number of
/// VJPs can be taken at the same input. Holds pointers to x, w and h, which
/// must outlive it.
class MuStepLinearization {
public:
    MuStepLinearization(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                        double guard);

    /// Factor cotangents of the step input; the x-cotangent is added into
    /// `cot_x_acc` unless it is null.
    FactorPair vjp(const DenseMatrix& cot_w_next, const DenseMatrix& cot_h_next,
                   DenseMatrix* cot_x_acc) const;

    /// Entries of WH and W′H at or below the guard.
    std::size_t guard_active() const noexcept { return guard_active_; }

private:
    const DenseMatrix* x_;
    const DenseMatrix* w_;
    const DenseMatrix* h_;
    double guard_;
    DenseMatrix ht_;
    DenseMatrix s_;
    DenseMatrix wn_;
    DenseMatrix ut_;
    std::vector<double> c_;
    std::vector<double> d_;
    std::size_t guard_active_ = 0;
};

/// mu_step_vjp that adds the x-cotangent into `cot_x_acc` (skipped when null)
/// and returns only the factor cotangents.
FactorPair mu_step_vjp_accumulate(const DenseMatrix& x, const DenseMatrix& w,
                                  const DenseMatrix& h, const DenseMatrix& cot_w_next,
                                  const DenseMatrix& cot_h_next, double guard,
                                  DenseMatrix* cot_x_acc);

/// Bytes of the O((M+N)k) scratch one mu_step or its VJP holds.
std::size_t mu_step_workspace_bytes(std::size_t m, std::size_t n, std::size_t k);
std::size_t mu_step_vjp_workspace_bytes(std::size_t m, std::size_t n, std::size_t k);

/// ∇_X of a terminal objective through `steps` multiplicative updates, by
/// reverse sweep over the recorded tape.
GradientReport backprop_gradient(const DenseMatrix& x, const DenseMatrix& w0,
                                 const DenseMatrix& h0, std::size_t steps,
                                 const TerminalObjective& objective,
                                 double guard = kDefaultGuard);

/// Feature-error gradient against balanced reference features.
GradientReport backprop_gradient(const DenseMatrix& x, const DenseMatrix& w0,
                                 const DenseMatrix& h0, std::size_t steps,
                                 const BalancedFeatures& ref, double guard = kDefaultGuard);

}  // namespace lafa

#endif  // LAFA_GRAD_BACKPROP_HPP
