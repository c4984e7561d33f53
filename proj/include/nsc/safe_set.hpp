#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsc/decision_set.hpp"
#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/projection.hpp"
#include "nsc/types.hpp"

namespace nsc {

/// Discrete-time control-barrier parameters: the per-row barrier
/// h_t(x) = l_{x,t} - L_{x,t} x must satisfy h_{t+1} >= (1 - alpha) h_t for
/// every admissible noise, alpha in (0, 1].  alpha = 1 reduces to plain
/// robust one-step containment.
struct CbfParams {
    double alpha = 0.5;
    CbfParams() = default;
    explicit CbfParams(double a) : alpha(a) {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw ConfigError("CbfParams: alpha must lie in (0,1], got " + std::to_string(a));
    }
};

/// Options shared by the set builders.
struct SafeSetOptions {
    /// Tighten each state row i by W*||L_i||_2 (per-row).  When false, every
    /// row is tightened by the whole-matrix spectral norm W*||L||_2 instead —
    /// more conservative, kept for comparison.
    bool row_norm_tightening = true;
};

namespace detail {

/// Append a halfspace row over the flattened decision, resolving degenerate
/// zero-coefficient rows immediately: a zero row is either vacuous (bound >=
/// 0, dropped) or a certificate that the set is empty at this state.
inline void push_row(std::vector<Vector>& rows, std::vector<double>& bounds, Vector coeff,
                     double bound, const char* ctx) {
    if (coeff.norm() == 0.0) {
        if (bound < -1e-12)
            throw SafeSetEmpty(std::string(ctx) + ": state makes a zero-coefficient row "
                               "infeasible (bound " + std::to_string(bound) + ")");
        return;
    }
    rows.push_back(std::move(coeff));
    bounds.push_back(bound);
}

inline Polytope rows_to_polytope(const std::vector<Vector>& rows,
                                 const std::vector<double>& bounds, Eigen::Index dim) {
    Matrix L(static_cast<Eigen::Index>(rows.size()), dim);
    Vector l(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        L.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        l(static_cast<Eigen::Index>(i)) = bounds[i];
    }
    return Polytope(std::move(L), std::move(l));
}

} // namespace detail

// ============================ Safe gain sets ================================

/// Feasible gains for one step of gain-space learning on an LTV system:
///
///   K_t = { K :  -L_i B_t K x_t <= l_i - L_i A_t x_t - W ||L_i||   (state rows)
///                -L_{u,j} K x_t <= l_{u,j}                         (input rows)
///                ||K|| <= kappa,  ||A_t - B_t K|| <= 1 - gamma }
///
/// Playing u_t = -K x_t with any K in the set keeps x_{t+1} inside the given
/// next-step polytope for every ||w_t|| <= W.  The decision is K (du x dx),
/// flattened row-major; a state row becomes the Frobenius inner product
/// <-(B_t' L_i') x_t', K> and an input row <-L_{u,j}' x_t', K>.
inline SafeDecisionSet build_gain_set(const LtvSystem& sys, long t, const Vector& x,
                                      const Polytope& state_con_next,
                                      const Polytope& input_con, double W, double kappa,
                                      double gamma, const SafeSetOptions& opts = {}) {
    if (x.size() != sys.dx)
        throw DimensionError("build_gain_set: state dim vs system dx");
    if (state_con_next.dim() != sys.dx)
        throw DimensionError("build_gain_set: next-step state polytope dim vs dx");
    if (input_con.dim() != sys.du)
        throw DimensionError("build_gain_set: input polytope dim vs du");
    if (W < 0.0) throw DimensionError("build_gain_set: W must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ConfigError("build_gain_set: gamma must lie in (0,1)");
    if (!(kappa > 0.0)) throw ConfigError("build_gain_set: kappa must be > 0");

    const Matrix A = sys.A_at(t);
    const Matrix B = sys.B_at(t);
    const Vector Ax = A * x;
    const double whole_norm = spectral_norm(state_con_next.L);

    std::vector<Vector> rows;
    std::vector<double> bounds;
    for (Eigen::Index i = 0; i < state_con_next.rows(); ++i) {
        const Vector Li = state_con_next.L.row(i).transpose();
        const Vector a = B.transpose() * Li;               // du
        const Matrix C = -a * x.transpose();               // du x dx
        const double tighten = W * (opts.row_norm_tightening ? Li.norm() : whole_norm);
        detail::push_row(rows, bounds, flatten_rm(C),
                         state_con_next.l(i) - Li.dot(Ax) - tighten, "build_gain_set");
    }
    for (Eigen::Index j = 0; j < input_con.rows(); ++j) {
        const Vector Lj = input_con.L.row(j).transpose();  // du
        const Matrix C = -Lj * x.transpose();              // du x dx
        detail::push_row(rows, bounds, flatten_rm(C), input_con.l(j), "build_gain_set");
    }

    SafeDecisionSet set;
    set.decision_rows = sys.du;
    set.decision_cols = sys.dx;
    set.halfspaces = detail::rows_to_polytope(rows, bounds, sys.du * sys.dx);
    set.norm_bound = NormBound{NormBound::Kind::Spectral, kappa, sys.du, sys.dx, 1};
    set.stability = StabilityConstraint{A, B, 1.0 - gamma};
    return set;
}

// ====================== Barrier-tightened input sets ========================

/// Feasible inputs for one step on a control-affine system, combining the
/// plant's input polytope with the noise-robust barrier decay condition
///
///   L_i g(x_t) u <= l_{next,i} - W ||L_i|| - L_i f(x_t)
///                   - (1 - alpha) (l_{now,i} - L_{now,i} x_t)
///
/// per paired row i of the current/next state polytopes.  Any u in the set
/// yields h_{t+1}(x_{t+1}) >= (1 - alpha) h_t(x_t) componentwise for every
/// ||w|| <= W, hence forward invariance of the safe region.
inline SafeDecisionSet build_input_set_dcbf(const Vector& fx, const Matrix& gx,
                                            const Vector& x, const Polytope& state_con_now,
                                            const Polytope& state_con_next,
                                            const Polytope& input_con, double W,
                                            const CbfParams& cbf,
                                            const SafeSetOptions& opts = {}) {
    const Eigen::Index dx = fx.size();
    const Eigen::Index du = gx.cols();
    if (gx.rows() != dx || x.size() != dx)
        throw DimensionError("build_input_set_dcbf: drift/gain/state dims disagree");
    if (state_con_now.dim() != dx || state_con_next.dim() != dx)
        throw DimensionError("build_input_set_dcbf: state polytope dims vs dx");
    if (state_con_now.rows() != state_con_next.rows())
        throw DimensionError("build_input_set_dcbf: current/next state polytopes must pair "
                             "rows (" + std::to_string(state_con_now.rows()) + " vs " +
                             std::to_string(state_con_next.rows()) + ")");
    if (input_con.dim() != du)
        throw DimensionError("build_input_set_dcbf: input polytope dim vs du");
    if (W < 0.0) throw DimensionError("build_input_set_dcbf: W must be >= 0");

    const Vector h_now = polytope_slack(state_con_now, x);
    const double whole_norm = spectral_norm(state_con_next.L);

    std::vector<Vector> rows;
    std::vector<double> bounds;
    for (Eigen::Index j = 0; j < input_con.rows(); ++j)
        detail::push_row(rows, bounds, input_con.L.row(j).transpose(), input_con.l(j),
                         "build_input_set_dcbf");
    for (Eigen::Index i = 0; i < state_con_next.rows(); ++i) {
        const Vector Li = state_con_next.L.row(i).transpose();
        const double tighten = W * (opts.row_norm_tightening ? Li.norm() : whole_norm);
        const double bound = state_con_next.l(i) - tighten - Li.dot(fx) -
                             (1.0 - cbf.alpha) * h_now(i);
        detail::push_row(rows, bounds, gx.transpose() * Li, bound, "build_input_set_dcbf");
    }

    SafeDecisionSet set;
    set.decision_rows = du;
    set.decision_cols = 1;
    set.halfspaces = detail::rows_to_polytope(rows, bounds, du);
    return set;
}

/// Control-affine convenience overload (evaluates the callbacks at x).
inline SafeDecisionSet build_input_set_dcbf(const ControlAffineSystem& sys, const Vector& x,
                                            const Polytope& state_con_now,
                                            const Polytope& state_con_next,
                                            const Polytope& input_con, double W,
                                            const CbfParams& cbf,
                                            const SafeSetOptions& opts = {}) {
    if (x.size() != sys.dx)
        throw DimensionError("build_input_set_dcbf: state dim vs system dx");
    const Vector fx = sys.f(x);
    const Matrix gx = sys.g(x);
    if (fx.size() != sys.dx || gx.rows() != sys.dx || gx.cols() != sys.du)
        throw DimensionError("build_input_set_dcbf: callback output shape");
    return build_input_set_dcbf(fx, gx, x, state_con_now, state_con_next, input_con, W, cbf,
                                opts);
}

/// LTV convenience overload: an LTV plant is control-affine with phi = A_t x,
/// G = B_t, which is how the projected baselines stay safe on linear plants.
inline SafeDecisionSet build_input_set_dcbf(const LtvSystem& sys, long t, const Vector& x,
                                            const Polytope& state_con_now,
                                            const Polytope& state_con_next,
                                            const Polytope& input_con, double W,
                                            const CbfParams& cbf,
                                            const SafeSetOptions& opts = {}) {
    return build_input_set_dcbf(Vector(sys.A_at(t) * x), sys.B_at(t), x, state_con_now,
                                state_con_next, input_con, W, cbf, opts);
}

// ========================= Policy substitution ==============================

/// Rewrite a safe input set as a set over policy parameters by substituting
/// the policy's input map into every halfspace row:
///   state feedback      u = -K x_t        row a'u <= c  ->  <-a x_t', K> <= c
///   disturbance action  u = sum K^[i] w_{t-i}           ->  sum_i <a w_{t-i}', K^[i]> <= c
/// A norm cap kappa is attached per parameter block.  Rows that lose their
/// coefficient (x_t = 0, or too-short noise history) degenerate to
/// feasibility checks, as in the paper's extension argument.
inline SafeDecisionSet substitute_policy(const SafeDecisionSet& input_set,
                                         const PolicyParams& shape, const Vector& x,
                                         const std::vector<Vector>& noise_history,
                                         double kappa) {
    if (input_set.decision_cols != 1)
        throw DimensionError("substitute_policy: expected an input-space set");
    const Eigen::Index du = input_set.decision_rows;
    if (shape.du != du) throw DimensionError("substitute_policy: policy du vs set du");
    if (!(kappa > 0.0)) throw ConfigError("substitute_policy: kappa must be > 0");

    const Polytope& P = input_set.halfspaces;
    std::vector<Vector> rows;
    std::vector<double> bounds;
    int n_blocks = 1;

    if (shape.kind == PolicyKind::StateFeedback) {
        if (x.size() != shape.dx) throw DimensionError("substitute_policy: state dim vs dx");
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            const Vector a = P.L.row(i).transpose();
            detail::push_row(rows, bounds, flatten_rm(Matrix(-a * x.transpose())), P.l(i),
                             "substitute_policy");
        }
    } else if (shape.kind == PolicyKind::DisturbanceAction) {
        n_blocks = shape.horizon;
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            const Vector a = P.L.row(i).transpose();
            Vector coeff = Vector::Zero(shape.horizon * du * shape.dx);
            for (int b = 0; b < shape.horizon; ++b) {
                if (static_cast<size_t>(b) >= noise_history.size()) break;  // zero block
                coeff.segment(static_cast<Eigen::Index>(b) * du * shape.dx, du * shape.dx) =
                    flatten_rm(Matrix(a * noise_history[static_cast<size_t>(b)].transpose()));
            }
            detail::push_row(rows, bounds, std::move(coeff), P.l(i), "substitute_policy");
        }
    } else {
        throw ConfigError("substitute_policy: DirectInput policies use the input set as-is");
    }

    SafeDecisionSet out;
    out.decision_rows = (shape.kind == PolicyKind::DisturbanceAction)
                            ? static_cast<Eigen::Index>(shape.horizon) * du
                            : du;
    out.decision_cols = shape.dx;
    out.halfspaces = detail::rows_to_polytope(rows, bounds, out.decision_rows * out.decision_cols);
    out.norm_bound = NormBound{NormBound::Kind::Spectral, kappa, du, shape.dx, n_blocks};
    return out;
}

// ========================= Feasibility and margins ==========================

/// Look for a feasible point by projecting the origin into the set.  Returns
/// the witness on success and nullopt when the set is empty or the projection
/// cannot certify membership at tolerance 1e-7.
inline std::optional<Vector> check_nonempty(const SafeDecisionSet& set,
                                            const ProjectionConfig& cfg = {}) {
    try {
        Vector witness = project_set(set, Vector::Zero(set.dim()), cfg);
        if (set_contains(set, witness, 1e-7)) return witness;
        return std::nullopt;
    } catch (const SafeSetEmpty&) {
        return std::nullopt;
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

namespace detail {

/// Deterministic unit directions for margin sampling: +/-1 in 1-D, otherwise
/// a fixed-seed batch of normalized Gaussian draws.
inline std::vector<Vector> unit_directions(Eigen::Index d, int n_samples) {
    std::vector<Vector> dirs;
    if (d == 1) {
        dirs.push_back(Vector::Constant(1, 1.0));
        dirs.push_back(Vector::Constant(1, -1.0));
        return dirs;
    }
    std::mt19937_64 eng(0x5afe5e75u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n_samples; ++i) {
        Vector v(d);
        do {
            for (Eigen::Index j = 0; j < d; ++j) v(j) = gauss(eng);
        } while (v.norm() < 1e-12);
        dirs.push_back(v / v.norm());
    }
    return dirs;
}

} // namespace detail

/// Smallest slack min_i (l_i - L_i x_{t+1}) of the successor state over w = 0
/// and sampled boundary noises ||w|| = W, for a fixed decision.  The decision
/// is either the input itself or a feedback gain (u = -K x).  Nonnegative
/// margin across samples corroborates the set construction; it is a probe,
/// not a proof.
inline double worst_case_successor_margin(const Vector& fx, const Matrix& gx, const Vector& x,
                                          const PolicyParams& decision,
                                          const Polytope& state_con_next, double W,
                                          int n_samples = 64) {
    Vector u;
    switch (decision.kind) {
        case PolicyKind::DirectInput: u = decision.theta.col(0); break;
        case PolicyKind::StateFeedback: u = -decision.theta * x; break;
        default:
            throw ConfigError("worst_case_successor_margin: disturbance-action policies "
                              "need the noise history; probe the input directly instead");
    }
    const Vector base = fx + gx * u;
    double margin = std::numeric_limits<double>::infinity();
    auto probe = [&](const Vector& w) {
        margin = std::min(margin, polytope_slack(state_con_next, base + w).minCoeff());
    };
    probe(Vector::Zero(fx.size()));
    for (const Vector& dir : detail::unit_directions(fx.size(), n_samples)) probe(W * dir);
    return margin;
}

/// LTV convenience overload.
inline double worst_case_successor_margin(const LtvSystem& sys, long t, const Vector& x,
                                          const PolicyParams& decision,
                                          const Polytope& state_con_next, double W,
                                          int n_samples = 64) {
    return worst_case_successor_margin(Vector(sys.A_at(t) * x), sys.B_at(t), x, decision,
                                       state_con_next, W, n_samples);
}

} // namespace nsc
