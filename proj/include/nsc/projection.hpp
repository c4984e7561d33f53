#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nsc/decision_set.hpp"
#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"

namespace nsc {

/// Knobs for the iterative projection routines.
struct ProjectionConfig {
    double tol = 1e-8;      ///< accuracy target; iterations stop well inside it
    int max_iters = 5000;   ///< Dykstra cycles / subgradient steps before giving up
    /// Seed inner iterative sub-projections (the affine-spectral Polyak loop)
    /// from the current iterate instead of a canonical start.  The outer
    /// Dykstra loop always starts at the query point — its limit must be the
    /// projection of that point — so results do not depend on this flag; it
    /// only saves inner iterations when decisions move slowly between steps.
    bool warm_start = true;
};

// ======================= Closed-form projection primitives ==================

/// Projection onto the halfspace { z : a'z <= b }.
inline Vector project_halfspace(const Vector& z, const Vector& a, double b) {
    if (a.size() != z.size())
        throw DimensionError("project_halfspace: normal dim vs point dim");
    const double nrm2 = a.squaredNorm();
    if (nrm2 == 0.0) {
        if (b < 0.0)
            throw DegenerateConstraint("project_halfspace: zero normal with bound " +
                                       std::to_string(b));
        return z;  // whole space
    }
    const double excess = a.dot(z) - b;
    if (excess <= 0.0) return z;
    return z - (excess / nrm2) * a;
}

/// Projection onto the Euclidean ball of radius r.
inline Vector project_euclidean_ball(const Vector& z, double r) {
    if (r < 0.0) throw DimensionError("project_euclidean_ball: negative radius");
    const double n = z.norm();
    if (n <= r) return z;
    if (n == 0.0) return z;  // r == 0 and z == 0
    return z * (r / n);
}

/// Projection onto { M : ||M||_2 <= r } by clipping singular values.
inline Matrix project_spectral_ball(const Matrix& M, double r) {
    if (r < 0.0) throw DimensionError("project_spectral_ball: negative radius");
    if (M.rows() == 1 || M.cols() == 1) {
        // rank-one shape: spectral norm equals the Euclidean norm
        const double n = M.norm();
        if (n <= r) return M;
        return M * (r / n);
    }
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = svd.singularValues();
    if (s.size() == 0 || s(0) <= r) return M;
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), r);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Projection of a gain K onto { K' : ||A - B K'||_2 <= r }.
///
/// For square invertible B the map K -> M = A - B K is a bijection, and the
/// result is B^{-1} (A - clip(A - B K)) — exact for scalar systems, and the
/// natural metric-transformed projection otherwise.  For non-square B the set
/// is reached by projected-subgradient descent on max(0, ||A - B K|| - r)
/// with Polyak steps, warm-started at K.
inline Matrix project_affine_spectral(const Matrix& K, const Matrix& A, const Matrix& B,
                                      double r, const ProjectionConfig& cfg = {}) {
    if (A.rows() != A.cols()) throw DimensionError("project_affine_spectral: A must be square");
    if (B.rows() != A.rows()) throw DimensionError("project_affine_spectral: B rows vs A");
    if (K.rows() != B.cols() || K.cols() != A.cols())
        throw DimensionError("project_affine_spectral: K shape vs (A,B)");
    if (r < 0.0) throw DimensionError("project_affine_spectral: negative radius");

    if (spectral_norm(A - B * K) <= r) return K;

    if (B.rows() == B.cols()) {
        Eigen::FullPivLU<Matrix> lu(B);
        if (lu.isInvertible()) {
            const Matrix Mc = project_spectral_ball(A - B * K, r);
            return lu.solve(A - Mc);
        }
    }

    // Subgradient of sigma_max(A - B K) wrt K is -B' u1 v1'.
    Matrix Kc = K;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const Matrix M = A - B * Kc;
        Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double h = svd.singularValues()(0) - r;
        if (h <= cfg.tol) return Kc;
        const Matrix g = -B.transpose() * svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
        const double g2 = g.squaredNorm();
        if (g2 == 0.0)
            throw NumericalError("project_affine_spectral: vanished subgradient with "
                                 "violation " + std::to_string(h));
        Kc -= (h / g2) * g;  // Polyak step onto the level set
    }
    throw NumericalError("project_affine_spectral: no convergence in " +
                         std::to_string(cfg.max_iters) + " iterations");
}

// ============================ Interval helpers ==============================

namespace detail {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty = false;

    void cut_below(double v) { lo = std::max(lo, v); }
    void cut_above(double v) { hi = std::min(hi, v); }
    /// Collapse near-degenerate intervals to their midpoint instead of
    /// declaring emptiness over floating-point dust (singleton sets arise
    /// naturally from paired tightened rows).
    void settle() {
        if (lo > hi) {
            const double eps = 1e-10 * (1.0 + std::abs(lo) + std::abs(hi));
            if (lo - hi <= eps) {
                const double mid = 0.5 * (lo + hi);
                lo = hi = mid;
            } else {
                empty = true;
            }
        }
    }
    double clamp(double v) const { return std::min(std::max(v, lo), hi); }
};

/// Exact feasible interval of a 1-D SafeDecisionSet.
inline Interval interval_of(const SafeDecisionSet& set) {
    Interval iv;
    const Polytope& P = set.halfspaces;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double a = P.L(i, 0);
        const double b = P.l(i);
        if (a > 0.0) iv.cut_above(b / a);
        else if (a < 0.0) iv.cut_below(b / a);
        // zero rows were resolved at Polytope construction
    }
    if (P.ball_radius) { iv.cut_below(-*P.ball_radius); iv.cut_above(*P.ball_radius); }
    if (P.spectral_radius) { iv.cut_below(-*P.spectral_radius); iv.cut_above(*P.spectral_radius); }
    if (set.norm_bound) { iv.cut_below(-set.norm_bound->kappa); iv.cut_above(set.norm_bound->kappa); }
    if (set.stability) {
        const double A = set.stability->A(0, 0);
        const double B = set.stability->B(0, 0);
        const double r = set.stability->radius;
        if (B > 0.0) { iv.cut_below((A - r) / B); iv.cut_above((A + r) / B); }
        else if (B < 0.0) { iv.cut_below((A + r) / B); iv.cut_above((A - r) / B); }
        else if (std::abs(A) > r) iv.empty = true;  // no K can help
    }
    iv.settle();
    return iv;
}

} // namespace detail

// ============================ Exact projection ==============================

/// Exact Euclidean projection of z onto a SafeDecisionSet.
///
/// 1-D sets use the closed-form interval intersection.  Higher dimensions run
/// Dykstra's alternating projections with one correction term per component
/// set, stopping when the per-cycle movement and the worst constraint
/// violation both fall below 1% of cfg.tol (so the result is trustworthy at
/// the cfg.tol scale).  A persistent violation that stops
/// improving is reported as SafeSetEmpty; running out of iterations while
/// still improving is a NumericalError.
inline Vector project_set(const SafeDecisionSet& set, const Vector& z,
                          const ProjectionConfig& cfg = {}) {
    if (z.size() != set.dim())
        throw DimensionError("project_set: point dim " + std::to_string(z.size()) +
                             " vs set dim " + std::to_string(set.dim()));

    if (set.dim() == 1) {
        const detail::Interval iv = detail::interval_of(set);
        if (iv.empty)
            throw SafeSetEmpty("project_set: 1-D set is empty (lo " + std::to_string(iv.lo) +
                               " > hi " + std::to_string(iv.hi) + ")");
        Vector out(1);
        out(0) = iv.clamp(z(0));
        return out;
    }

    if (set_violation(set, z) <= 0.0) return z;  // already feasible

    // Assemble the component projectors.
    using Proj = std::function<Vector(const Vector&)>;
    std::vector<Proj> projs;
    const Polytope& P = set.halfspaces;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Vector a = P.L.row(i).transpose();
        const double b = P.l(i);
        projs.emplace_back([a, b](const Vector& v) { return project_halfspace(v, a, b); });
    }
    if (P.ball_radius) {
        const double r = *P.ball_radius;
        projs.emplace_back([r](const Vector& v) { return project_euclidean_ball(v, r); });
    }
    if (P.spectral_radius) {
        const double r = *P.spectral_radius;
        const Eigen::Index sr = P.spec_rows, sc = P.spec_cols;
        projs.emplace_back([r, sr, sc](const Vector& v) {
            return flatten_rm(project_spectral_ball(unflatten_rm(v, sr, sc), r));
        });
    }
    if (set.norm_bound) {
        const NormBound nb = *set.norm_bound;
        if (nb.kind == NormBound::Kind::Euclidean) {
            projs.emplace_back([nb](const Vector& v) { return project_euclidean_ball(v, nb.kappa); });
        } else {
            const Eigen::Index bsz = nb.block_rows * nb.block_cols;
            projs.emplace_back([nb, bsz](const Vector& v) {
                Vector out = v;
                for (int b = 0; b < nb.n_blocks; ++b)
                    out.segment(b * bsz, bsz) = flatten_rm(project_spectral_ball(
                        unflatten_rm(v.segment(b * bsz, bsz), nb.block_rows, nb.block_cols),
                        nb.kappa));
                return out;
            });
        }
    }
    if (set.stability) {
        const StabilityConstraint st = *set.stability;
        const ProjectionConfig inner = cfg;
        projs.emplace_back([st, inner](const Vector& v) {
            const Matrix K = unflatten_rm(v, st.B.cols(), st.A.cols());
            return flatten_rm(project_affine_spectral(K, st.A, st.B, st.radius, inner));
        });
    }
    if (projs.empty()) return z;  // unconstrained

    // Dykstra's algorithm with one correction per set.
    Vector x = z;
    std::vector<Vector> corr(projs.size(), Vector::Zero(z.size()));
    double best_viol = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int cycle = 0; cycle < cfg.max_iters; ++cycle) {
        const Vector x_prev = x;
        for (size_t i = 0; i < projs.size(); ++i) {
            const Vector y = projs[i](x + corr[i]);
            corr[i] = x + corr[i] - y;
            x = y;
        }
        const double movement = (x - x_prev).norm();
        const double viol = set_violation(set, x);
        // converge two orders past the advertised tol so that results behave
        // like exact projections at the cfg.tol scale (idempotence, oracle
        // agreement, variational inequality)
        if (movement < 0.01 * cfg.tol && viol < 0.01 * cfg.tol) return x;
        if (viol < best_viol - cfg.tol) {
            best_viol = viol;
            stall = 0;
        } else if (++stall > 200 && viol > std::max(100.0 * cfg.tol, 1e-8)) {
            // Iterates keep bouncing between components without closing the
            // violation: the intersection is (numerically) empty.
            throw SafeSetEmpty("project_set: persistent violation " + std::to_string(viol) +
                               " after " + std::to_string(cycle + 1) + " cycles");
        }
    }
    throw NumericalError("project_set: no convergence in " + std::to_string(cfg.max_iters) +
                         " cycles (violation " + std::to_string(set_violation(set, x)) + ")");
}

// ============================ Grid-search oracle ============================

namespace detail {

/// Conservative per-axis bounds for the feasible region, from axis-aligned
/// rows and norm caps.  Used only to bound the oracle's search.
inline std::pair<Vector, Vector> bounding_box(const SafeDecisionSet& set) {
    const Eigen::Index d = set.dim();
    const double BIG = 1e6;
    Vector lo = Vector::Constant(d, -BIG), hi = Vector::Constant(d, BIG);
    auto cap = [&](double r) {
        for (Eigen::Index i = 0; i < d; ++i) {
            lo(i) = std::max(lo(i), -r);
            hi(i) = std::min(hi(i), r);
        }
    };
    const Polytope& P = set.halfspaces;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Eigen::Index nz = -1;
        bool axis = true;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (P.L(i, j) != 0.0) {
                if (nz >= 0) { axis = false; break; }
                nz = j;
            }
        }
        if (!axis || nz < 0) continue;
        const double a = P.L(i, nz), b = P.l(i);
        if (a > 0.0) hi(nz) = std::min(hi(nz), b / a);
        else lo(nz) = std::max(lo(nz), b / a);
    }
    if (P.ball_radius) cap(*P.ball_radius);
    if (P.spectral_radius && (P.spec_rows == 1 || P.spec_cols == 1)) cap(*P.spectral_radius);
    if (set.norm_bound) {
        const NormBound& nb = *set.norm_bound;
        if (nb.kind == NormBound::Kind::Euclidean || nb.block_rows == 1 || nb.block_cols == 1)
            cap(nb.kappa);
    }
    for (Eigen::Index i = 0; i < d; ++i)
        if (lo(i) <= -BIG || hi(i) >= BIG)
            throw Error("brute_force_project: feasible region is not bounded by "
                        "axis-aligned rows or norm caps; cannot grid-search");
    return {lo, hi};
}

/// Feasible interval for the last coordinate given the leading coordinates
/// fixed.  Every supported constraint restricts the free coordinate to an
/// interval, so the per-line minimization is exact.
inline Interval last_axis_interval(const SafeDecisionSet& set, const Vector& fixed) {
    const Eigen::Index d = set.dim();
    const Eigen::Index k = d - 1;  // free coordinate
    Interval iv;
    const Polytope& P = set.halfspaces;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        double rest = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) rest += P.L(i, j) * fixed(j);
        const double a = P.L(i, k), b = P.l(i) - rest;
        if (a > 0.0) iv.cut_above(b / a);
        else if (a < 0.0) iv.cut_below(b / a);
        else if (b < -1e-12) { iv.empty = true; return iv; }
    }
    auto cut_ball = [&](double r) {
        double rest2 = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) rest2 += fixed(j) * fixed(j);
        const double room = r * r - rest2;
        if (room < 0.0) { iv.empty = true; return; }
        const double half = std::sqrt(room);
        iv.cut_below(-half);
        iv.cut_above(half);
    };
    if (P.ball_radius) cut_ball(*P.ball_radius);
    if (!iv.empty && P.spectral_radius) {
        if (P.spec_rows != 1 && P.spec_cols != 1)
            throw Error("brute_force_project: spectral ball on a fat matrix is not "
                        "supported by the grid oracle");
        cut_ball(*P.spectral_radius);
    }
    if (!iv.empty && set.norm_bound) {
        const NormBound& nb = *set.norm_bound;
        if (nb.kind != NormBound::Kind::Euclidean && nb.block_rows != 1 && nb.block_cols != 1)
            throw Error("brute_force_project: blockwise spectral cap unsupported by the "
                        "grid oracle beyond vector blocks");
        if (nb.n_blocks != 1)
            throw Error("brute_force_project: multi-block decisions exceed the oracle");
        cut_ball(nb.kappa);
    }
    if (!iv.empty && set.stability)
        throw Error("brute_force_project: stability constraints are only supported by "
                    "the 1-D grid oracle");
    if (!iv.empty) iv.settle();
    return iv;
}

} // namespace detail

/// Independent projection oracle for low-dimensional sets (dim <= 3), used to
/// cross-check project_set.  The first dim-1 coordinates sweep a dense grid
/// of pitch grid_step; the last coordinate is minimized exactly over its
/// feasible interval per grid line (a literal dense grid over every axis is
/// hopeless at fine pitches in 2-D/3-D, and the per-line interval math keeps
/// this oracle closed-form and Dykstra-free).  A few local refinement sweeps
/// around the incumbent keep the error at the grid_step scale even where the
/// boundary is steep against the scan axis.  1-D is a literal dense grid.
inline Vector brute_force_project(const SafeDecisionSet& set, const Vector& z,
                                  double grid_step) {
    const Eigen::Index d = set.dim();
    if (d < 1 || d > 3)
        throw DimensionError("brute_force_project: dimension " + std::to_string(d) +
                             " outside [1,3]");
    if (z.size() != d) throw DimensionError("brute_force_project: point dim vs set dim");
    if (!(grid_step > 0.0)) throw DimensionError("brute_force_project: grid_step must be > 0");

    if (d == 1) {
        const auto [lo, hi] = detail::bounding_box(set);
        double best = std::numeric_limits<double>::infinity();
        Vector best_z(1);
        bool found = false;
        const long n = static_cast<long>(std::floor((hi(0) - lo(0)) / grid_step));
        for (long k = 0; k <= n + 1; ++k) {
            const double v = std::min(lo(0) + static_cast<double>(k) * grid_step, hi(0));
            Vector cand(1);
            cand(0) = v;
            if (set_violation(set, cand) > 1e-12) continue;
            const double dist = std::abs(v - z(0));
            if (dist < best) { best = dist; best_z = cand; found = true; }
        }
        if (!found) throw SafeSetEmpty("brute_force_project: no feasible grid point (1-D)");
        return best_z;
    }

    const auto [lo, hi] = detail::bounding_box(set);
    double best = std::numeric_limits<double>::infinity();
    Vector best_z;
    bool found = false;
    const Eigen::Index k = d - 1;

    auto sweep = [&](const Vector& wlo, const Vector& whi, double pitch) {
        std::vector<long> counts(static_cast<size_t>(k));
        for (Eigen::Index j = 0; j < k; ++j)
            counts[static_cast<size_t>(j)] =
                static_cast<long>(std::floor((whi(j) - wlo(j)) / pitch)) + 1;
        std::vector<long> idx(static_cast<size_t>(k), 0);
        while (true) {
            Vector cand(d);
            for (Eigen::Index j = 0; j < k; ++j)
                cand(j) = std::min(
                    wlo(j) + static_cast<double>(idx[static_cast<size_t>(j)]) * pitch, whi(j));
            const detail::Interval iv = detail::last_axis_interval(set, cand);
            if (!iv.empty) {
                cand(k) = iv.clamp(z(k));
                const double dist = (cand - z).norm();
                if (dist < best) { best = dist; best_z = cand; found = true; }
            }
            // odometer increment over the gridded axes
            Eigen::Index j = 0;
            for (; j < k; ++j) {
                if (++idx[static_cast<size_t>(j)] <= counts[static_cast<size_t>(j)]) break;
                idx[static_cast<size_t>(j)] = 0;
            }
            if (j == k) break;
        }
    };

    sweep(lo.head(k), hi.head(k), grid_step);
    if (!found) throw SafeSetEmpty("brute_force_project: no feasible grid line");

    // Local refinement: where the boundary runs steeply against the scan axis
    // (e.g. near a norm ball's extreme points) the coarse candidate can slide
    // along the face by step * slope.  The incumbent's scanned coordinates are
    // always within ~one pitch of the true projection's, so re-sweeping a
    // shrinking window around them removes the slope amplification.
    double pitch = grid_step;
    for (int round = 0; round < 4; ++round) {
        const double window = 2.0 * pitch;
        pitch /= 20.0;
        Vector wlo(k), whi(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            wlo(j) = std::max(lo(j), best_z(j) - window);
            whi(j) = std::min(hi(j), best_z(j) + window);
        }
        sweep(wlo, whi, pitch);
    }
    return best_z;
}

} // namespace nsc
