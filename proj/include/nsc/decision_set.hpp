#pragma once

#include <optional>
#include <string>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/types.hpp"

namespace nsc {

/// Norm cap on the decision variable.  Spectral norm applies per block of the
/// (row-major flattened) decision matrix; for vector decisions and single-row
/// blocks the spectral and Euclidean norms coincide.
struct NormBound {
    enum class Kind { Euclidean, Spectral };
    Kind kind = Kind::Spectral;
    double kappa = 0.0;
    Eigen::Index block_rows = 0;  ///< rows of one block (du for gain policies)
    Eigen::Index block_cols = 0;  ///< cols of one block (dx for gain policies)
    int n_blocks = 1;             ///< >1 only for disturbance-action stacks
};

/// Closed-loop contraction requirement ||A - B K||_2 <= radius on a gain
/// decision K (flattened row-major in the ambient decision vector).
struct StabilityConstraint {
    Matrix A;
    Matrix B;
    double radius = 0.0;
};

/// Convex feasible set for one step of the online learner: an intersection of
/// halfspaces with an optional norm cap and an optional closed-loop stability
/// constraint.  The decision is a decision_rows x decision_cols matrix
/// flattened row-major; vector decisions use decision_cols == 1.
struct SafeDecisionSet {
    Polytope halfspaces;
    std::optional<NormBound> norm_bound;
    std::optional<StabilityConstraint> stability;
    Eigen::Index decision_rows = 0;
    Eigen::Index decision_cols = 1;

    Eigen::Index dim() const { return decision_rows * decision_cols; }
};

/// Largest constraint violation of z over every part of the set; <= 0 means
/// z is feasible.
inline double set_violation(const SafeDecisionSet& set, const Vector& z) {
    if (z.size() != set.dim())
        throw DimensionError("set_violation: point dim " + std::to_string(z.size()) +
                             " vs set dim " + std::to_string(set.dim()));
    double v = 0.0;
    if (set.halfspaces.rows() > 0)
        v = std::max(v, (set.halfspaces.L * z - set.halfspaces.l).maxCoeff());
    if (set.norm_bound) {
        const NormBound& nb = *set.norm_bound;
        if (nb.kind == NormBound::Kind::Euclidean) {
            v = std::max(v, z.norm() - nb.kappa);
        } else {
            const Eigen::Index bsz = nb.block_rows * nb.block_cols;
            for (int b = 0; b < nb.n_blocks; ++b) {
                const Matrix blk = unflatten_rm(z.segment(b * bsz, bsz), nb.block_rows, nb.block_cols);
                v = std::max(v, spectral_norm(blk) - nb.kappa);
            }
        }
    }
    if (set.stability) {
        const StabilityConstraint& st = *set.stability;
        const Matrix K = unflatten_rm(z, st.B.cols(), st.A.cols());
        v = std::max(v, spectral_norm(st.A - st.B * K) - st.radius);
    }
    return v;
}

/// Membership at additive tolerance tol.
inline bool set_contains(const SafeDecisionSet& set, const Vector& z, double tol = 1e-9) {
    return set_violation(set, z) <= tol;
}

} // namespace nsc
