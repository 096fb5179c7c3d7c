#ifndef LAFA_ATTACK_HPP
#define LAFA_ATTACK_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lafa/feature_error.hpp"
#include "lafa/grad_implicit.hpp"
#include "lafa/matrix.hpp"
#include "lafa/nmf.hpp"
#include "lafa/objective.hpp"

namespace lafa {

enum class AttackNorm { l2, linf };
enum class GradMethod { backprop, implicit };

std::string_view to_string(AttackNorm norm);
std::string_view to_string(GradMethod method);
std::optional<AttackNorm> parse_attack_norm(std::string_view name);
std::optional<GradMethod> parse_grad_method(std::string_view name);
std::optional<Objective> parse_objective(std::string_view name);

struct AttackConfig {
    AttackNorm norm = AttackNorm::linf;
    double epsilon = 0.0;  ///< budget in normalized-input units
    std::size_t steps = 40;
    std::optional<double> step_size;  ///< defaults to 2.5·ε/steps
    GradMethod grad_method = GradMethod::implicit;
    std::size_t nmf_iterations = 10000;
    std::uint64_t seed = 0;  ///< seeds the (W_init, H_init) pair shared by every inner NMF
    std::optional<double> clamp_hi = 1.0;
    Objective objective = Objective::feature_error;
    JxMode jx_mode = JxMode::jx_free;
    /// Passed to the implicit engine; the inner NMF runs a fixed number of
    /// steps, so this bounds how far from stationary the linearization may be.
    double fixed_point_tol = 1e-4;
    /// Extra multiplicative updates the implicit engine may run on its copy of
    /// the model to reach fixed_point_tol; metrics still use the T-step model.
    std::size_t polish_iterations = 20000;
    double guard = kDefaultGuard;

    double resolved_step_size() const;
    /// Throws PreconditionError on ε < 0, steps = 0, step_size ≤ 0, zero
    /// nmf_iterations or clamp_hi ≤ 0.
    void validate() const;
};

/// Cost and diagnostics of one gradient evaluation inside an attack.
struct GradStepSummary {
    std::size_t step = 0;
    std::size_t bytes_peak = 0;
    double wall_ms = 0.0;
    double loss_value = 0.0;
    /// Implicit engine only (zero for back-propagation).
    double solve_residual = 0.0;
    double fixed_point_residual = 0.0;
    std::size_t gauge_rank = 0;
    std::size_t polish_iterations = 0;
};

/// Traces have one entry per evaluated iterate: index 0 is the clean input,
/// index s the input after s ascent steps. Reconstruction errors are
/// ‖X_s − W_sH_s‖_F (absolute) and that over ‖X‖_F of the clean input.
struct AttackResult {
    DenseMatrix x_adv;  ///< best iterate
    std::vector<double> fe_trace;
    std::vector<ReconstructionError> recon_trace;
    std::vector<double> w_error_trace;
    std::vector<double> delta_fro_trace;  ///< ‖X_s − X‖_F
    std::vector<GradStepSummary> grad_reports;
    std::size_t best_step = 0;
    double perturbation_norm = 0.0;  ///< ‖x_adv − x‖ in the attack norm
    std::size_t assignment_flips = 0;
    /// Set when the ascent stopped before cfg.steps (for example a collapsed
    /// component made the loss non-differentiable).
    std::optional<std::string> stopped_early;

    double final_fe() const { return fe_trace.at(best_step); }
    const ReconstructionError& final_recon() const { return recon_trace.at(best_step); }
};

/// Metrics of one factorization of `x` against `ref`.
struct IterateMetrics {
    double fe = 0.0;
    ReconstructionError recon;
    double w_error = 0.0;
    Assignment assignment;
};

/// Scores a factorization of x. Collapsed components go through balance_guarded.
IterateMetrics evaluate_iterate(const DenseMatrix& x, const NmfModel& model,
                                const BalancedFeatures& ref, double clean_norm);

/// The shared inner-NMF initialization derived from cfg.seed.
FactorPair attack_init(const AttackConfig& cfg, std::size_t m, std::size_t n, std::size_t k);

/// Projects x + δ onto the ε-ball around x in the attack norm, then clamps to
/// [0, clamp_hi] (non-negativity is always enforced).
DenseMatrix project_perturbation(const DenseMatrix& x, const DenseMatrix& candidate,
                                 const AttackConfig& cfg);

/// ‖a − b‖ in the attack norm.
double perturbation_norm(const DenseMatrix& a, const DenseMatrix& b, AttackNorm norm);

/// ∇_X of the configured objective at x, using the configured engine.
struct AttackGradient {
    DenseMatrix grad;
    GradStepSummary summary;
};
AttackGradient attack_gradient(const DenseMatrix& x, const NmfModel& model, const FactorPair& init,
                               const BalancedFeatures& ref, const AttackConfig& cfg);

/// Single signed (L∞) or normalized (L2) step of length ε.
AttackResult fgsm(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg);

/// Projected gradient ascent from δ = 0 with best-iterate reporting.
AttackResult pgd(const DenseMatrix& x, const BalancedFeatures& ref, const AttackConfig& cfg);

struct PathPoint {
    double alpha = 0.0;
    double fe = 0.0;
    double recon_rel = 0.0;  ///< relative to the blend itself
    double w_error = 0.0;
};

/// Factorizes α·x̃ + (1 − α)·x for each α with the cfg.seed initialization
/// and scores it against ref.
std::vector<PathPoint> interpolation_path(const DenseMatrix& x, const DenseMatrix& x_tilde,
                                          const std::vector<double>& alphas,
                                          const BalancedFeatures& ref, const AttackConfig& cfg);

/// Evenly spaced grid from 0 to 1 inclusive.
std::vector<double> alpha_grid(double step);

/// Singular values of W, descending.
std::vector<double> rank_profile(const DenseMatrix& w);

}  // namespace lafa

#endif  // LAFA_ATTACK_HPP
