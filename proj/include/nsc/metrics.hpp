#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/projection.hpp"
#include "nsc/safe_set.hpp"
#include "nsc/types.hpp"

namespace nsc {

// ============================= Run log ======================================

/// Everything one run produces.  states holds x_1..x_{T+1} (one more entry
/// than the other columns, so the final reached state is recorded); row t of
/// the per-step columns describes step t.  safe_state[t] says whether the
/// *successor* x_{t+1} landed inside the state polytope for step t+1, and
/// safe_input[t] whether u_t satisfied the input polytope at step t.
struct RunLog {
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    std::vector<Vector> noises;
    std::vector<double> losses;
    std::vector<double> zetas;
    std::vector<char> safe_state;
    std::vector<char> safe_input;

    /// Set when the run stopped early because a safe set came up empty; an
    /// aborted run counts as unsafe regardless of the per-step flags.
    bool aborted = false;
    std::string abort_reason;

    long T() const { return static_cast<long>(inputs.size()); }

    double cumulative_loss() const {
        return std::accumulate(losses.begin(), losses.end(), 0.0);
    }

    bool all_safe() const {
        if (aborted) return false;
        for (char c : safe_state) if (!c) return false;
        for (char c : safe_input) if (!c) return false;
        return true;
    }

    void validate() const {
        const size_t T = inputs.size();
        if (states.size() != T + 1 || noises.size() != T || losses.size() != T ||
            zetas.size() != T || safe_state.size() != T || safe_input.size() != T)
            throw DimensionError("RunLog: column lengths disagree (T = " + std::to_string(T) +
                                 ")");
    }
};

/// Fraction of runs whose every logged safety flag is true.
inline double safety_rate(const std::vector<RunLog>& runs) {
    if (runs.empty()) return 1.0;
    long ok = 0;
    for (const RunLog& r : runs) ok += r.all_safe() ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(runs.size());
}

/// Per-step set variation summed: S_T = sum_t zeta_t.
inline double set_variation_ST(const RunLog& log) {
    return std::accumulate(log.zetas.begin(), log.zetas.end(), 0.0);
}

// ============================ Comparator ====================================

/// How the dynamic-regret comparator evolves its state:
///   FromActual — replay the learner's own visited states x_t and ask, at
///     each of them, for the best safe input under the realized noise (the
///     default: isolates decision quality from trajectory divergence);
///   Coupled — the comparator rolls its own trajectory under the realized
///     noise sequence.
enum class ComparatorMode { FromActual, Coupled };

/// Per-step clairvoyant trajectory u*_t = argmin_{u in U_t} c_t(x', u) with
/// the realized w_t inside x' = phi_t(x) + G_t(x) u + w_t.
struct ComparatorTrajectory {
    std::vector<Vector> states;  ///< the states the minimization was run from
    std::vector<Vector> inputs;
    std::vector<double> losses;
};

namespace detail {

/// Minimize the convex quadratic c_t over a safe input set by projected
/// gradient with a 1/L step (closed-form clamp in one dimension, where the
/// projection of the unconstrained minimizer is exact).
inline Vector min_quadratic_over_set(const QuadraticLoss& loss, long t, const Vector& phi,
                                     const Matrix& G, const Vector& w,
                                     const SafeDecisionSet& U, const ProjectionConfig& pcfg,
                                     double tol = 1e-8) {
    const Matrix Q = loss.Q_at(t);
    const Matrix R = loss.R_at(t);
    const Vector c = phi + w;
    // unconstrained minimizer: (G'QG + R) u = -G'Q c
    const Matrix H = G.transpose() * Q * G + R;
    const Eigen::Index du = G.cols();
    Matrix Hreg = 2.0 * H + 1e-12 * Matrix::Identity(du, du);
    Vector u = Hreg.ldlt().solve(-2.0 * G.transpose() * (Q * c));
    u = project_set(U, u, pcfg);
    if (U.dim() == 1) return u;  // clamped global optimum of a 1-D convex quadratic

    const double lip = 2.0 * (spectral_norm(G) * spectral_norm(G) * spectral_norm(Q) +
                              spectral_norm(R)) + 1e-12;
    for (int it = 0; it < 20000; ++it) {
        const Vector x_next = c + G * u;
        const Vector grad = 2.0 * G.transpose() * (Q * x_next) + 2.0 * R * u;
        const Vector u_new = project_set(U, Vector(u - grad / lip), pcfg);
        const double move = (u_new - u).norm();
        u = u_new;
        if (move <= tol * (1.0 + u.norm())) return u;
    }
    throw NumericalError("min_quadratic_over_set: projected gradient did not settle");
}

} // namespace detail

/// Build the greedy comparator for a finished run.  The safe input sets are
/// rebuilt exactly as the run built them (same barrier decay alpha, same
/// tightening), so the comparator plays by the same safety rules as the
/// learner — it just gets to see w_t before choosing.
inline ComparatorTrajectory greedy_comparator(const RunLog& log, const OneStepModel& model,
                                              const QuadraticLoss& loss,
                                              const Schedule<Polytope>& state_con,
                                              const Schedule<Polytope>& input_con, double W,
                                              double alpha,
                                              ComparatorMode mode = ComparatorMode::FromActual,
                                              const ProjectionConfig& pcfg = {},
                                              const SafeSetOptions& opts = {}) {
    log.validate();
    ComparatorTrajectory out;
    const long T = log.T();
    Vector x_own = log.states.empty() ? Vector() : log.states[0];
    for (long t = 1; t <= T; ++t) {
        const Vector& x = (mode == ComparatorMode::FromActual)
                              ? log.states[static_cast<size_t>(t - 1)]
                              : x_own;
        const Vector phi = model.phi(t, x);
        const Matrix G = model.G(t, x);
        const Vector& w = log.noises[static_cast<size_t>(t - 1)];
        const SafeDecisionSet U =
            build_input_set_dcbf(phi, G, x, state_con.at(t), state_con.at(t + 1),
                                 input_con.at(t), W, CbfParams(alpha), opts);
        const Vector u = detail::min_quadratic_over_set(loss, t, phi, G, w, U, pcfg);
        out.states.push_back(x);
        out.inputs.push_back(u);
        out.losses.push_back(loss_eval(loss, t, Vector(phi + G * u + w), u));
        if (mode == ComparatorMode::Coupled) x_own = phi + G * u + w;
    }
    return out;
}

/// Dynamic regret: realized cumulative loss minus the comparator's.
inline double dynamic_regret(const RunLog& log, const ComparatorTrajectory& comp) {
    if (comp.losses.size() != log.losses.size())
        throw DimensionError("dynamic_regret: comparator length vs run length");
    return log.cumulative_loss() -
           std::accumulate(comp.losses.begin(), comp.losses.end(), 0.0);
}

/// Comparator path length C_T = sum_{t>=2} ||u*_t - u*_{t-1}||.
inline double path_length_CT(const ComparatorTrajectory& comp) {
    double c = 0.0;
    for (size_t t = 1; t < comp.inputs.size(); ++t)
        c += (comp.inputs[t] - comp.inputs[t - 1]).norm();
    return c;
}

// ============================ LQR baseline ==================================

/// Stationary discrete Riccati solution by fixed-point iteration from P = Q,
///   P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA,
/// and the associated gain K = (R + B'PB)^{-1} B'PA (so u = -K x).  The
/// result is validated by the Riccati residual and by rho(A - B K) < 1.
struct LqrSolution {
    Matrix K;
    Matrix P;
};

inline LqrSolution lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q,
                            const Matrix& R, double tol = 1e-12, int max_iters = 100000) {
    if (A.rows() != A.cols()) throw DimensionError("lqr_gain: A must be square");
    if (B.rows() != A.rows()) throw DimensionError("lqr_gain: B rows vs A");
    if (Q.rows() != A.rows() || Q.cols() != A.cols()) throw DimensionError("lqr_gain: Q shape");
    if (R.rows() != B.cols() || R.cols() != B.cols()) throw DimensionError("lqr_gain: R shape");

    Matrix P = Q;
    for (int it = 0; it < max_iters; ++it) {
        const Matrix S = R + B.transpose() * P * B;
        const Matrix Pn = Q + A.transpose() * P * A -
                          A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A);
        const double delta = (Pn - P).cwiseAbs().maxCoeff();
        P = Pn;
        if (delta < tol) {
            LqrSolution sol;
            const Matrix S2 = R + B.transpose() * P * B;
            sol.K = S2.ldlt().solve(B.transpose() * P * A);
            sol.P = P;
            const Matrix resid = Q + A.transpose() * P * A -
                                 A.transpose() * P * B * S2.ldlt().solve(B.transpose() * P * A) -
                                 P;
            if (resid.cwiseAbs().maxCoeff() > 1e-8)
                throw NumericalError("lqr_gain: converged iterate fails the Riccati residual");
            if (spectral_radius(A - B * sol.K) >= 1.0)
                throw NumericalError("lqr_gain: closed loop is not contracting");
            return sol;
        }
    }
    throw NumericalError("lqr_gain: fixed point not reached in " + std::to_string(max_iters) +
                         " iterations");
}

} // namespace nsc
