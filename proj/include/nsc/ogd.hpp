#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
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

// ===================== Loss in decision space ===============================

/// f_t(decision) = c_t(x_{t+1}, u_t) with x_{t+1} = phi + G u + w and u the
/// input played by the decision at state x.  This is the reduction that turns
/// the control round into an online-convex-optimization round: w_t enters
/// additively, so f_t is a convex quadratic in the decision.
inline double policy_loss(const QuadraticLoss& loss, const OneStepModel& model, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision,
                          const std::vector<Vector>& noise_history = {},
                          bool zero_pad_history = false) {
    if (x.size() != model.dx || w.size() != model.dx)
        throw DimensionError("policy_loss: x/w dims vs model dx");
    const Vector u = policy_to_input(decision, x, noise_history, zero_pad_history);
    const Vector x_next = model.phi(t, x) + model.G(t, x) * u + w;
    return loss_eval(loss, t, x_next, u);
}

inline double policy_loss(const QuadraticLoss& loss, const LtvSystem& sys, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision) {
    return policy_loss(loss, make_view(sys), t, x, w, decision);
}

inline double policy_loss(const QuadraticLoss& loss, const ControlAffineSystem& sys, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision) {
    return policy_loss(loss, make_view(sys), t, x, w, decision);
}

/// Analytic gradient of policy_loss with respect to the decision, same shape
/// as decision.theta.  With s = G'(2 Q x_{t+1}) + 2 R u:
///   direct input        grad = s
///   state feedback      grad = -s x'         (u = -K x)
///   disturbance action  grad_[i] = s w_{t-i}'
inline Matrix policy_grad(const QuadraticLoss& loss, const OneStepModel& model, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision,
                          const std::vector<Vector>& noise_history = {},
                          bool zero_pad_history = false) {
    if (x.size() != model.dx || w.size() != model.dx)
        throw DimensionError("policy_grad: x/w dims vs model dx");
    const Vector u = policy_to_input(decision, x, noise_history, zero_pad_history);
    const Matrix G = model.G(t, x);
    const Vector x_next = model.phi(t, x) + G * u + w;
    const auto [dc_dx, dc_du] = loss_grad_xu(loss, t, x_next, u);
    const Vector s = G.transpose() * dc_dx + dc_du;
    switch (decision.kind) {
        case PolicyKind::DirectInput:
            return s;
        case PolicyKind::StateFeedback:
            return -s * x.transpose();
        case PolicyKind::DisturbanceAction: {
            Matrix grad = Matrix::Zero(decision.theta.rows(), decision.theta.cols());
            for (int i = 0; i < decision.horizon; ++i) {
                if (static_cast<size_t>(i) >= noise_history.size()) break;
                grad.middleRows(static_cast<Eigen::Index>(i) * decision.du, decision.du) =
                    s * noise_history[static_cast<size_t>(i)].transpose();
            }
            return grad;
        }
    }
    throw Error("policy_grad: unreachable");
}

inline Matrix policy_grad(const QuadraticLoss& loss, const LtvSystem& sys, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision) {
    return policy_grad(loss, make_view(sys), t, x, w, decision);
}

inline Matrix policy_grad(const QuadraticLoss& loss, const ControlAffineSystem& sys, long t,
                          const Vector& x, const Vector& w, const PolicyParams& decision) {
    return policy_grad(loss, make_view(sys), t, x, w, decision);
}

// ===================== Projected online gradient descent ====================

/// State of one projected-OGD learner.
struct OgdState {
    PolicyParams decision;
    double eta = 0.0;
    std::shared_ptr<const SafeDecisionSet> last_set;  ///< set the decision lives in
    long step_index = 1;
};

/// Theorem-rate default step size eta = D_f / (G_f sqrt(T)).
inline double default_step_size(long T, double D_f, double G_f) {
    if (!(D_f > 0.0) || !(G_f > 0.0) || T < 1)
        throw ConfigError("default_step_size: need D_f > 0, G_f > 0, T >= 1");
    return D_f / (G_f * std::sqrt(static_cast<double>(T)));
}

/// Start a learner inside `first_set`.  The initial decision is the feasible
/// witness nearest the zero decision (projection of zero), unless `init`
/// supplies an explicit starting point, which is projected to be safe too.
inline OgdState init_ogd(const PolicyParams& shape,
                         const std::shared_ptr<const SafeDecisionSet>& first_set, double eta,
                         const ProjectionConfig& cfg = {},
                         const std::optional<Matrix>& init = std::nullopt) {
    if (!first_set) throw ConfigError("init_ogd: null first set");
    if (first_set->dim() != shape.theta.size())
        throw DimensionError("init_ogd: set dim " + std::to_string(first_set->dim()) +
                             " vs decision size " + std::to_string(shape.theta.size()));
    if (!(eta > 0.0)) throw ConfigError("init_ogd: step size must be > 0");
    Vector z0 = init ? flatten_rm(*init) : Vector(Vector::Zero(first_set->dim()));
    OgdState st;
    st.decision = shape;
    st.decision.theta =
        unflatten_rm(project_set(*first_set, z0, cfg), shape.theta.rows(), shape.theta.cols());
    st.eta = eta;
    st.last_set = first_set;
    st.step_index = 1;
    return st;
}

/// Result of one OGD update.
struct OgdStepResult {
    OgdState next;
    double zeta = 0.0;  ///< ||Pi_{last}(z') - Pi_{next}(z')||, the per-step set variation
};

/// One round of safe projected OGD: descend along the played loss gradient,
/// then project onto the *next* feasible set (the one the decision must live
/// in when it is played).  zeta_t measures how much the moving feasible set
/// itself displaced the update — the quantity whose sum S_T appears alongside
/// the comparator path length in the regret bound.
inline OgdStepResult ogd_step(const OgdState& state, const Matrix& grad,
                              const std::shared_ptr<const SafeDecisionSet>& next_set,
                              const ProjectionConfig& cfg = {}) {
    if (!next_set) throw ConfigError("ogd_step: null next set");
    if (grad.rows() != state.decision.theta.rows() || grad.cols() != state.decision.theta.cols())
        throw DimensionError("ogd_step: gradient shape vs decision shape");
    if (next_set->dim() != state.decision.theta.size())
        throw DimensionError("ogd_step: next set dim vs decision size");

    const Vector z_prime = flatten_rm(state.decision.theta) - state.eta * flatten_rm(grad);
    const Vector proj_next = project_set(*next_set, z_prime, cfg);
    const Vector proj_last =
        state.last_set ? project_set(*state.last_set, z_prime, cfg) : proj_next;

    OgdStepResult out;
    out.zeta = (proj_last - proj_next).norm();
    out.next = state;
    out.next.decision.theta =
        unflatten_rm(proj_next, state.decision.theta.rows(), state.decision.theta.cols());
    out.next.last_set = next_set;
    out.next.step_index = state.step_index + 1;
    return out;
}

// ===================== Empirical gradient bound =============================

namespace detail {

inline std::pair<Vector, Vector> polytope_bbox(const Polytope& P) {
    const Eigen::Index d = P.dim();
    const double BIG = 1e6;
    Vector lo = Vector::Constant(d, -BIG), hi = Vector::Constant(d, BIG);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Eigen::Index nz = -1;
        bool axis = true;
        for (Eigen::Index j = 0; j < d; ++j)
            if (P.L(i, j) != 0.0) {
                if (nz >= 0) { axis = false; break; }
                nz = j;
            }
        if (!axis || nz < 0) continue;
        if (P.L(i, nz) > 0.0) hi(nz) = std::min(hi(nz), P.l(i) / P.L(i, nz));
        else lo(nz) = std::max(lo(nz), P.l(i) / P.L(i, nz));
    }
    if (P.ball_radius)
        for (Eigen::Index j = 0; j < d; ++j) {
            lo(j) = std::max(lo(j), -*P.ball_radius);
            hi(j) = std::min(hi(j), *P.ball_radius);
        }
    for (Eigen::Index j = 0; j < d; ++j)
        if (lo(j) <= -BIG || hi(j) >= BIG)
            throw Error("polytope_bbox: unbounded axis " + std::to_string(j));
    return {lo, hi};
}

template <class Rng>
inline Vector sample_in_polytope(const Polytope& P, Rng& eng) {
    const auto [lo, hi] = polytope_bbox(P);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Vector v(P.dim());
        for (Eigen::Index j = 0; j < P.dim(); ++j) v(j) = lo(j) + (hi(j) - lo(j)) * unit(eng);
        if (polytope_contains(P, v, 0.0)) return v;
    }
    throw NumericalError("sample_in_polytope: rejection sampling starved");
}

template <class Rng>
inline Vector sample_in_ball(Eigen::Index d, double r, Rng& eng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = gauss(eng);
    const double n = v.norm();
    if (n < 1e-12) return Vector::Zero(d);
    return v * (r * std::pow(unit(eng), 1.0 / static_cast<double>(d)) / n);
}

} // namespace detail

/// Empirical Lipschitz bound G_f: the largest gradient norm over n
/// deterministic pseudo-random draws of (x in the state polytope, ||w|| <= W,
/// decision within its norm cap), inflated by a 1.5x safety margin.  Used as
/// the default when no analytic bound is configured.
inline double estimate_gradient_bound(const QuadraticLoss& loss, const OneStepModel& model,
                                      const Polytope& state_con, const Polytope& input_con,
                                      double W, double kappa, PolicyKind kind, int horizon = 1,
                                      int n = 1000, std::uint64_t seed = 0x6ad60badUL) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vector x = detail::sample_in_polytope(state_con, eng);
        const Vector w = detail::sample_in_ball(model.dx, W, eng);
        PolicyParams dec;
        std::vector<Vector> hist;
        switch (kind) {
            case PolicyKind::DirectInput:
                dec = PolicyParams::direct_input(detail::sample_in_polytope(input_con, eng));
                break;
            case PolicyKind::StateFeedback: {
                Matrix K(model.du, model.dx);
                for (Eigen::Index r = 0; r < K.rows(); ++r)
                    for (Eigen::Index c = 0; c < K.cols(); ++c) K(r, c) = kappa * sym(eng);
                dec = PolicyParams::state_feedback(project_spectral_ball(K, kappa));
                break;
            }
            case PolicyKind::DisturbanceAction: {
                Matrix stacked(horizon * model.du, model.dx);
                for (Eigen::Index r = 0; r < stacked.rows(); ++r)
                    for (Eigen::Index c = 0; c < stacked.cols(); ++c)
                        stacked(r, c) = kappa * sym(eng);
                for (int b = 0; b < horizon; ++b) {
                    stacked.middleRows(static_cast<Eigen::Index>(b) * model.du, model.du) =
                        project_spectral_ball(
                            stacked.middleRows(static_cast<Eigen::Index>(b) * model.du, model.du),
                            kappa);
                    hist.push_back(detail::sample_in_ball(model.dx, W, eng));
                }
                dec = PolicyParams::disturbance_action(stacked, horizon, model.du, model.dx);
                break;
            }
        }
        worst = std::max(worst,
                         policy_grad(loss, model, 1, x, w, dec, hist, true).norm());
    }
    if (worst == 0.0)
        throw NumericalError("estimate_gradient_bound: all sampled gradients were zero");
    return 1.5 * worst;
}

} // namespace nsc
