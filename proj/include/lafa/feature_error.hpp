#ifndef LAFA_FEATURE_ERROR_HPP
#define LAFA_FEATURE_ERROR_HPP

#include <cstddef>
#include <vector>

#include "lafa/matrix.hpp"
#include "lafa/nmf.hpp"

namespace lafa {

/// W and Hᵀ stacked into one (M+N)×k matrix after rescaling every component
/// so both halves carry the norm √(‖Wᵢ‖·‖Hᵢ‖).
///
/// The product W̄·H̄ equals W·H, and any positive diagonal rescaling
/// (WD, D⁻¹H) maps to the same BalancedFeatures, so distances between them
/// compare latent features rather than arbitrary scalings.
struct BalancedFeatures {
    DenseMatrix wh;          ///< rows [0, m_rows) hold W̄, the rest hold H̄ᵀ
    std::size_t m_rows = 0;  ///< M

    std::size_t rank() const noexcept { return wh.cols(); }
    DenseMatrix w_block() const;  ///< W̄, M×k
    DenseMatrix h_block() const;  ///< H̄, k×N
};

/// Component permutation: NMF component i is matched to reference component perm[i].
struct Assignment {
    std::vector<std::size_t> perm;
    double total_cost = 0.0;
};

struct FeatureErrorResult {
    double fe = 0.0;
    Assignment assignment;
};

/// Throws DegenerateComponentError naming the first zero column of W or zero row of H.
BalancedFeatures balance(const DenseMatrix& w, const DenseMatrix& h);

/// Same construction with component norms floored at `norm_floor` instead of
/// throwing; used for metrics on collapsed (rank-deficient) factorizations.
BalancedFeatures balance_guarded(const DenseMatrix& w, const DenseMatrix& h,
                                 double norm_floor = 1e-12);

/// Feature-wise error matrix: fem(i, j) = ‖aᵢ − bⱼ‖₂ over balanced columns.
DenseMatrix fem(const BalancedFeatures& a, const BalancedFeatures& b);

/// Minimal-cost bijection for a square cost matrix (O(k³) shortest augmenting
/// paths with row/column potentials).
Assignment hungarian(const DenseMatrix& cost);

/// Moves column i of `cols` to column perm[i].
DenseMatrix permute_columns(const DenseMatrix& cols, const std::vector<std::size_t>& perm);

/// Feature error ‖Π(nmf) − ref‖_F / ‖ref‖_F with Π the assignment minimizing
/// the squared FEM cost.
FeatureErrorResult fe_loss(const BalancedFeatures& nmf, const BalancedFeatures& ref);

/// ‖Π(W_nmf) − W_ref‖_F / ‖W_ref‖_F under a given assignment. Callers pass
/// balanced W̄ blocks so the comparison is scale-free.
double w_only_error(const DenseMatrix& w_nmf, const DenseMatrix& w_ref,
                    const Assignment& assignment);

/// Gradient of the feature error with respect to the unbalanced factors,
/// differentiating through the balancing and holding `assignment` fixed.
/// Zero when the loss is exactly zero (the norm has no gradient there).
FactorPair fe_loss_gradient(const DenseMatrix& w, const DenseMatrix& h,
                            const BalancedFeatures& ref, const Assignment& assignment);

}  // namespace lafa

#endif  // LAFA_FEATURE_ERROR_HPP
