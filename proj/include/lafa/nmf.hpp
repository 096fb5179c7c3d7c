#ifndef LAFA_NMF_HPP
#define LAFA_NMF_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "lafa/matrix.hpp"

namespace lafa {

/// Floor applied to every denominator and log argument in the KL updates.
inline constexpr double kDefaultGuard = 1e-12;

struct FactorPair {
    DenseMatrix w;  ///< M×k
    DenseMatrix h;  ///< k×N
};

struct NmfConfig {
    std::size_t max_iterations = 1000;
    /// Stop once ‖(W,H)_t − (W,H)_{t−1}‖_F / ‖(W,H)_{t−1}‖_F falls below this.
    /// Disabled by default so every run performs exactly max_iterations steps.
    std::optional<double> rel_change_tol;
    double epsilon_guard = kDefaultGuard;
    /// Divergence is recorded at iteration 0, every record_every steps, and at the end.
    std::size_t record_every = 10;
};

struct NmfModel {
    DenseMatrix w;
    DenseMatrix h;
    std::size_t rank = 0;
    std::size_t iterations_run = 0;
    std::vector<double> divergence_history;
    std::vector<std::size_t> history_iterations;  ///< iteration of each history entry
};

struct ReconstructionError {
    double absolute = 0.0;  ///< ‖X − WH‖_F
    double relative = 0.0;  ///< ‖X − WH‖_F / ‖X‖_F (0 when X = 0)
};

/// Generalized KL divergence D(X ‖ WH) with 0·log(0/q) = 0 and the log
/// denominator floored at `guard`.
double kl_divergence(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                     double guard = kDefaultGuard);

/// One multiplicative update: W with the old H, then H with the new W.
FactorPair mu_step(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                   double guard = kDefaultGuard);

/// Runs cfg.max_iterations multiplicative updates from a strictly positive
/// initialization (zeros are absorbing under MU, so they are rejected).
NmfModel run_nmf(const DenseMatrix& x, const DenseMatrix& w_init, const DenseMatrix& h_init,
                 const NmfConfig& cfg);

/// Strictly positive random initialization, entries in (0, 1].
FactorPair seed_factors(Rng& rng, std::size_t m, std::size_t n, std::size_t k);

ReconstructionError reconstruction_error(const DenseMatrix& x, const DenseMatrix& w,
                                         const DenseMatrix& h);
ReconstructionError reconstruction_error(const DenseMatrix& x, const NmfModel& model);

/// Throws ShapeError unless x is M×N, w is M×k and h is k×N.
void check_factor_shapes(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& h,
                         const char* what);

}  // namespace lafa

#endif  // LAFA_NMF_HPP
