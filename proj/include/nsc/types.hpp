#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/schedule.hpp"

namespace nsc {

// ============================= Polytope =====================================

/// Intersection of halfspaces { z : L z <= l }, optionally intersected with a
/// Euclidean ball ||z|| <= r and/or a spectral ball ||reshape(z)|| <= r for
/// matrix-valued decision variables flattened row-major.
struct Polytope {
    Matrix L;  ///< m x d row normals
    Vector l;  ///< m bounds

    std::optional<double> ball_radius;      ///< Euclidean ball, if any
    std::optional<double> spectral_radius;  ///< spectral ball, if any
    Eigen::Index spec_rows = 0;             ///< reshape shape for the spectral ball
    Eigen::Index spec_cols = 0;

    Polytope() = default;

    /// Rows with a zero normal are degenerate: trivially true ones (l_i >= 0)
    /// are dropped, impossible ones (l_i < 0) are a construction error.
    Polytope(Matrix L_in, Vector l_in) {
        if (L_in.rows() != l_in.size())
            throw DimensionError("Polytope: L has " + std::to_string(L_in.rows()) +
                                 " rows but l has " + std::to_string(l_in.size()) + " entries");
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < L_in.rows(); ++i) {
            if (L_in.row(i).norm() == 0.0) {
                if (l_in(i) < 0.0)
                    throw DegenerateConstraint("Polytope: row " + std::to_string(i) +
                                               " has zero normal and negative bound " +
                                               std::to_string(l_in(i)));
                continue;  // 0 <= l_i always holds; drop the row
            }
            keep.push_back(i);
        }
        L.resize(static_cast<Eigen::Index>(keep.size()), L_in.cols());
        l.resize(static_cast<Eigen::Index>(keep.size()));
        for (size_t k = 0; k < keep.size(); ++k) {
            L.row(static_cast<Eigen::Index>(k)) = L_in.row(keep[k]);
            l(static_cast<Eigen::Index>(k)) = l_in(keep[k]);
        }
    }

    Eigen::Index dim() const { return L.cols(); }
    Eigen::Index rows() const { return L.rows(); }

    /// Axis-aligned box |z_i| <= bound_i, the common experimental case.
    static Polytope box(const Vector& bound) {
        const Eigen::Index d = bound.size();
        Matrix L(2 * d, d);
        Vector l(2 * d);
        L.setZero();
        for (Eigen::Index i = 0; i < d; ++i) {
            L(2 * i, i) = 1.0;
            L(2 * i + 1, i) = -1.0;
            l(2 * i) = bound(i);
            l(2 * i + 1) = bound(i);
        }
        return Polytope(std::move(L), std::move(l));
    }
};

/// Signed slack vector h = l - L z (nonnegative iff z satisfies the rows).
inline Vector polytope_slack(const Polytope& p, const Vector& z) {
    if (z.size() != p.dim())
        throw DimensionError("polytope_slack: point dim " + std::to_string(z.size()) +
                             " vs polytope dim " + std::to_string(p.dim()));
    return p.l - p.L * z;
}

/// Membership test with additive tolerance on every constraint.
inline bool polytope_contains(const Polytope& p, const Vector& z, double tol = 1e-9) {
    if (p.rows() > 0 && polytope_slack(p, z).minCoeff() < -tol) return false;
    if (p.ball_radius && z.norm() > *p.ball_radius + tol) return false;
    if (p.spectral_radius) {
        if (p.spec_rows * p.spec_cols != z.size())
            throw DimensionError("polytope_contains: spectral shape mismatch");
        if (spectral_norm(unflatten_rm(z, p.spec_rows, p.spec_cols)) > *p.spectral_radius + tol)
            return false;
    }
    return true;
}

// ============================= Systems ======================================

/// Linear time-varying system x_{t+1} = A_t x_t + B_t u_t + w_t with stored
/// spectral-norm bounds kappa_A >= ||A_t||, kappa_B >= ||B_t||.  Bounds are
/// checked at construction for constant/table schedules (generators are
/// checked lazily on access).
struct LtvSystem {
    Schedule<Matrix> A;
    Schedule<Matrix> B;
    double kappa_A = 0.0;
    double kappa_B = 0.0;
    Eigen::Index dx = 0;
    Eigen::Index du = 0;

    LtvSystem() = default;
    LtvSystem(Schedule<Matrix> A_in, Schedule<Matrix> B_in, double kA, double kB)
        : A(std::move(A_in)), B(std::move(B_in)), kappa_A(kA), kappa_B(kB) {
        bool seen = false;
        A.for_each_stored([&](const Matrix& m) {
            if (m.rows() != m.cols()) throw DimensionError("LtvSystem: A_t must be square");
            if (!seen) { dx = m.rows(); seen = true; }
            else if (m.rows() != dx) throw DimensionError("LtvSystem: inconsistent A_t sizes");
            if (spectral_norm(m) > kappa_A + 1e-12)
                throw DimensionError("LtvSystem: ||A_t|| exceeds kappa_A");
        });
        bool seen_b = false;
        B.for_each_stored([&](const Matrix& m) {
            if (!seen_b) { du = m.cols(); seen_b = true; }
            else if (m.cols() != du) throw DimensionError("LtvSystem: inconsistent B_t sizes");
            if (seen && m.rows() != dx) throw DimensionError("LtvSystem: B_t row count vs A_t");
            if (spectral_norm(m) > kappa_B + 1e-12)
                throw DimensionError("LtvSystem: ||B_t|| exceeds kappa_B");
        });
        if (!seen || !seen_b)
            throw DimensionError("LtvSystem: generator schedules need explicit dx/du; "
                                 "use the four-argument constructor with dimensions");
    }
    /// Constructor for generator schedules where dimensions cannot be inferred.
    LtvSystem(Schedule<Matrix> A_in, Schedule<Matrix> B_in, double kA, double kB,
              Eigen::Index dx_in, Eigen::Index du_in)
        : A(std::move(A_in)), B(std::move(B_in)), kappa_A(kA), kappa_B(kB), dx(dx_in), du(du_in) {}

    Matrix A_at(long t) const {
        Matrix m = A.at(t);
        if (m.rows() != dx || m.cols() != dx) throw DimensionError("LtvSystem: A_t shape");
        return m;
    }
    Matrix B_at(long t) const {
        Matrix m = B.at(t);
        if (m.rows() != dx || m.cols() != du) throw DimensionError("LtvSystem: B_t shape");
        return m;
    }
};

/// Control-affine system x_{t+1} = f(x_t) + g(x_t) u_t + w_t given by
/// callbacks.  `name` identifies the registered model for logs/config.
struct ControlAffineSystem {
    std::function<Vector(const Vector&)> f;
    std::function<Matrix(const Vector&)> g;
    Eigen::Index dx = 0;
    Eigen::Index du = 0;
    std::string name;
};

/// One step of the LTV dynamics.
inline Vector step_ltv(const LtvSystem& sys, long t, const Vector& x, const Vector& u,
                       const Vector& w) {
    if (x.size() != sys.dx || u.size() != sys.du || w.size() != sys.dx)
        throw DimensionError("step_ltv: operand dims (x " + std::to_string(x.size()) + ", u " +
                             std::to_string(u.size()) + ", w " + std::to_string(w.size()) +
                             ") vs system (dx " + std::to_string(sys.dx) + ", du " +
                             std::to_string(sys.du) + ")");
    return sys.A_at(t) * x + sys.B_at(t) * u + w;
}

/// One step of the control-affine dynamics.
inline Vector step_affine(const ControlAffineSystem& sys, const Vector& x, const Vector& u,
                          const Vector& w) {
    if (x.size() != sys.dx || u.size() != sys.du || w.size() != sys.dx)
        throw DimensionError("step_affine: operand dims vs system dims");
    Vector fx = sys.f(x);
    Matrix gx = sys.g(x);
    if (fx.size() != sys.dx || gx.rows() != sys.dx || gx.cols() != sys.du)
        throw DimensionError("step_affine: callback output shape");
    return fx + gx * u + w;
}

// ============================= Noise bound ==================================

/// Adversarial noise magnitude bound ||w_t|| <= W.  No distribution assumed.
struct NoiseBound {
    double W = 0.0;
    NoiseBound() = default;
    explicit NoiseBound(double W_in) : W(W_in) {
        if (!(W >= 0.0)) throw DimensionError("NoiseBound: W must be >= 0");
    }
};

// ============================= Quadratic loss ===============================

/// Per-step cost c_t(x_{t+1}, u_t) = x_{t+1}' Q_t x_{t+1} + u_t' R_t u_t with
/// PSD weights.  The state argument is the successor state: the cost of step
/// t charges where the input sent the system plus the effort spent.
struct QuadraticLoss {
    Schedule<Matrix> Q;
    Schedule<Matrix> R;

    QuadraticLoss() = default;
    QuadraticLoss(Schedule<Matrix> Q_in, Schedule<Matrix> R_in)
        : Q(std::move(Q_in)), R(std::move(R_in)) {
        auto check_psd = [](const Matrix& m, const char* which) {
            if (m.rows() != m.cols())
                throw DimensionError(std::string("QuadraticLoss: ") + which + " must be square");
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
            if (es.eigenvalues().minCoeff() < -1e-10)
                throw DimensionError(std::string("QuadraticLoss: ") + which +
                                     " is not positive semidefinite");
        };
        Q.for_each_stored([&](const Matrix& m) { check_psd(m, "Q_t"); });
        R.for_each_stored([&](const Matrix& m) { check_psd(m, "R_t"); });
    }

    Matrix Q_at(long t) const { return Q.at(t); }
    Matrix R_at(long t) const { return R.at(t); }
};

/// Evaluate c_t(x_next, u).
inline double loss_eval(const QuadraticLoss& loss, long t, const Vector& x_next,
                        const Vector& u) {
    const Matrix Q = loss.Q_at(t);
    const Matrix R = loss.R_at(t);
    if (Q.rows() != x_next.size() || R.rows() != u.size())
        throw DimensionError("loss_eval: weight dims (Q " + std::to_string(Q.rows()) + ", R " +
                             std::to_string(R.rows()) + ") vs arguments (x " +
                             std::to_string(x_next.size()) + ", u " + std::to_string(u.size()) +
                             ")");
    return x_next.dot(Q * x_next) + u.dot(R * u);
}

/// Partial gradients (d c/d x_next, d c/d u) = (2 Q x_next, 2 R u).
inline std::pair<Vector, Vector> loss_grad_xu(const QuadraticLoss& loss, long t,
                                              const Vector& x_next, const Vector& u) {
    const Matrix Q = loss.Q_at(t);
    const Matrix R = loss.R_at(t);
    if (Q.rows() != x_next.size() || R.rows() != u.size())
        throw DimensionError("loss_grad_xu: weight dims vs arguments");
    return {2.0 * Q * x_next, 2.0 * R * u};
}

// t-free conveniences for time-invariant losses
inline double loss_eval(const QuadraticLoss& loss, const Vector& x_next, const Vector& u) {
    return loss_eval(loss, 1, x_next, u);
}
inline std::pair<Vector, Vector> loss_grad_xu(const QuadraticLoss& loss, const Vector& x_next,
                                              const Vector& u) {
    return loss_grad_xu(loss, 1, x_next, u);
}

// ============================= Policies =====================================

enum class PolicyKind {
    DirectInput,        ///< the decision is u_t itself
    StateFeedback,      ///< u_t = -K x_t
    DisturbanceAction,  ///< u_t = sum_{i=1..H} K^[i] w_{t-i}
};

/// Decision variable of the online learner.  theta holds, by kind:
///   DirectInput:       du x 1  (the input)
///   StateFeedback:     du x dx (the gain K)
///   DisturbanceAction: (H*du) x dx blocks stacked vertically, block i being
///                      K^[i] applied to w_{t-i}
struct PolicyParams {
    PolicyKind kind = PolicyKind::DirectInput;
    Matrix theta;
    int horizon = 0;  ///< H, DisturbanceAction only
    Eigen::Index du = 0;
    Eigen::Index dx = 0;

    static PolicyParams direct_input(Vector u) {
        PolicyParams p;
        p.kind = PolicyKind::DirectInput;
        p.du = u.size();
        p.dx = 0;
        p.theta = u;
        return p;
    }
    static PolicyParams state_feedback(Matrix K) {
        PolicyParams p;
        p.kind = PolicyKind::StateFeedback;
        p.du = K.rows();
        p.dx = K.cols();
        p.theta = std::move(K);
        return p;
    }
    static PolicyParams disturbance_action(Matrix stacked, int H, Eigen::Index du,
                                           Eigen::Index dx) {
        if (stacked.rows() != H * du || stacked.cols() != dx)
            throw DimensionError("PolicyParams: stacked disturbance-action shape");
        PolicyParams p;
        p.kind = PolicyKind::DisturbanceAction;
        p.du = du;
        p.dx = dx;
        p.horizon = H;
        p.theta = std::move(stacked);
        return p;
    }
};

// ========================= One-step model view ==============================

/// Uniform handle on the one-step dynamics x_{t+1} = phi_t(x) + G_t(x) u + w,
/// where phi = A_t x, G = B_t for LTV plants and phi = f(x), G = g(x) for
/// control-affine ones.  Everything downstream of the plant type (losses in
/// decision space, safe input sets, comparators) works through this view.
struct OneStepModel {
    std::function<Vector(long, const Vector&)> phi;
    std::function<Matrix(long, const Vector&)> G;
    Eigen::Index dx = 0;
    Eigen::Index du = 0;
};

inline OneStepModel make_view(const LtvSystem& sys) {
    OneStepModel v;
    v.phi = [sys](long t, const Vector& x) { return Vector(sys.A_at(t) * x); };
    v.G = [sys](long t, const Vector&) { return sys.B_at(t); };
    v.dx = sys.dx;
    v.du = sys.du;
    return v;
}

inline OneStepModel make_view(const ControlAffineSystem& sys) {
    OneStepModel v;
    v.phi = [sys](long, const Vector& x) { return sys.f(x); };
    v.G = [sys](long, const Vector& x) { return sys.g(x); };
    v.dx = sys.dx;
    v.du = sys.du;
    return v;
}

/// Map a policy to the input it plays.  `noise_history` lists past noises
/// most-recent-first (front() = w_{t-1}); only DisturbanceAction reads it.
/// A short history raises HistoryError unless zero-padding is allowed.
inline Vector policy_to_input(const PolicyParams& policy, const Vector& x,
                              const std::vector<Vector>& noise_history = {},
                              bool zero_pad_history = false) {
    switch (policy.kind) {
        case PolicyKind::DirectInput:
            return policy.theta.col(0);
        case PolicyKind::StateFeedback:
            if (x.size() != policy.dx)
                throw DimensionError("policy_to_input: state dim " + std::to_string(x.size()) +
                                     " vs gain cols " + std::to_string(policy.dx));
            return -policy.theta * x;
        case PolicyKind::DisturbanceAction: {
            if (!zero_pad_history &&
                noise_history.size() < static_cast<size_t>(policy.horizon))
                throw HistoryError("policy_to_input: have " +
                                   std::to_string(noise_history.size()) + " past noises, need " +
                                   std::to_string(policy.horizon) +
                                   " (enable zero padding to allow a cold start)");
            Vector u = Vector::Zero(policy.du);
            for (int i = 0; i < policy.horizon; ++i) {
                if (static_cast<size_t>(i) >= noise_history.size()) break;  // zero pad
                const Vector& w = noise_history[static_cast<size_t>(i)];
                if (w.size() != policy.dx)
                    throw DimensionError("policy_to_input: noise dim vs policy dx");
                u += policy.theta.middleRows(static_cast<Eigen::Index>(i) * policy.du, policy.du) * w;
            }
            return u;
        }
    }
    throw Error("policy_to_input: unreachable");
}

} // namespace nsc
