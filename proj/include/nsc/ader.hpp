#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/ogd.hpp"

namespace nsc {

// ===================== Adaptive regret: expert grid =========================

/// Configuration of the two-level learner: a geometric grid of base step
/// sizes, the initial expert prior, and the meta learning rate.
struct AderConfig {
    int N = 0;                  ///< number of base learners
    std::vector<double> etas;   ///< eta_i = 2^{i-1} sqrt(7 D^2 / (2 T G^2))
    std::vector<double> p1;     ///< p_{1,i} = (N+1) / (N i (i+1))
    double eps = 0.0;           ///< meta rate sqrt(2 / (T D^2 G^2))
    long T = 0;
    /// Charge experts the true per-step loss instead of its linearization.
    /// Requires passing a loss evaluator to ader_update; off by default (one
    /// gradient evaluation per step suffices for the linearized rule).
    bool full_meta_loss = false;
};

/// Build the exact grid for horizon T, decision diameter D_f and gradient
/// bound G_f:
///   N    = ceil(1/2 log2(1 + 8T/7)) + 1
///   eta_i = 2^{i-1} sqrt(7 D_f^2 / (2 T G_f^2))
///   p_1,i = (1/(i(i+1))) (N+1)/N           (sums to 1 by telescoping)
///   eps  = sqrt(2 / (T D_f^2 G_f^2))
/// The grid spans step sizes from the theorem-optimal-for-static rate up past
/// the rate matched to maximal drift, so some expert is always within a
/// factor 2 of the best tuning in hindsight.
inline AderConfig make_ader_config(long T, double D_f, double G_f) {
    if (T < 1) throw ConfigError("make_ader_config: T must be >= 1");
    if (!(D_f > 0.0) || !(G_f > 0.0))
        throw ConfigError("make_ader_config: D_f and G_f must be > 0");
    AderConfig cfg;
    cfg.T = T;
    cfg.N = static_cast<int>(
                std::ceil(0.5 * std::log2(1.0 + 8.0 * static_cast<double>(T) / 7.0))) +
            1;
    const double eta_base =
        std::sqrt(7.0 * D_f * D_f / (2.0 * static_cast<double>(T) * G_f * G_f));
    for (int i = 1; i <= cfg.N; ++i) {
        cfg.etas.push_back(std::ldexp(eta_base, i - 1));  // exact power-of-two ladder
        cfg.p1.push_back((1.0 / (static_cast<double>(i) * (i + 1.0))) *
                         (static_cast<double>(cfg.N) + 1.0) / static_cast<double>(cfg.N));
    }
    cfg.eps = std::sqrt(2.0 / (static_cast<double>(T) * D_f * D_f * G_f * G_f));
    return cfg;
}

/// Meta-learner state: N base OGD learners plus multiplicative weights kept
/// in log domain.
struct AderState {
    AderConfig cfg;
    std::vector<OgdState> bases;
    std::vector<double> log_w;
    long step_index = 1;
};

/// Current expert weights, floored at 1e-300 and normalized.
inline std::vector<double> ader_weights(const AderState& state) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double lw : state.log_w) mx = std::max(mx, lw);
    std::vector<double> p(state.log_w.size());
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::max(std::exp(state.log_w[i] - mx), 1e-300);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

/// Weight-averaged decision actually played: K_t = sum_i p_{t,i} K_{t,i}.
/// Feasible whenever every base is feasible, by convexity of the set.
inline PolicyParams ader_combine(const AderState& state) {
    if (state.bases.empty()) throw ConfigError("ader_combine: no base learners");
    const std::vector<double> p = ader_weights(state);
    PolicyParams combined = state.bases[0].decision;
    combined.theta = Matrix::Zero(combined.theta.rows(), combined.theta.cols());
    for (size_t i = 0; i < state.bases.size(); ++i)
        combined.theta += p[i] * state.bases[i].decision.theta;
    return combined;
}

/// All bases start at the same feasible witness inside the first set; the
/// prior over experts is p1 from the config.
inline AderState init_ader(const AderConfig& cfg, const PolicyParams& shape,
                           const std::shared_ptr<const SafeDecisionSet>& first_set,
                           const ProjectionConfig& pcfg = {},
                           const std::optional<Matrix>& init = std::nullopt) {
    if (cfg.N < 1) throw ConfigError("init_ader: config has no experts");
    AderState st;
    st.cfg = cfg;
    for (int i = 0; i < cfg.N; ++i) {
        st.bases.push_back(init_ogd(shape, first_set, cfg.etas[static_cast<size_t>(i)], pcfg, init));
        st.log_w.push_back(std::log(cfg.p1[static_cast<size_t>(i)]));
    }
    st.step_index = 1;
    return st;
}

/// Result of one meta round.
struct AderStepResult {
    AderState next;
    double zeta = 0.0;  ///< expert-weighted per-step set variation
};

/// Linearized loss an expert is charged by the meta learner:
/// <grad, K_i - K_combined> in the Frobenius inner product.
inline double surrogate_meta_loss(const Matrix& grad, const Matrix& K_i,
                                  const Matrix& K_combined) {
    return flatten_rm(grad).dot(flatten_rm(K_i) - flatten_rm(K_combined));
}

/// One round of the two-level update, driven by the gradient taken at the
/// *combined* decision:
///   1. charge each expert the linearized surrogate <grad, K_{t,i} - K_t>
///      and tilt the weights multiplicatively (log domain, rate eps);
///   2. let every base learner take its own projected-OGD step with the same
///      gradient (valid because the surrogate is linear: its gradient at any
///      point equals grad).
/// The logged zeta is the new-weight average of the base learners' zetas.
/// When cfg.full_meta_loss is set and `loss_at` is provided, step 1 charges
/// loss_at(K_{t,i}) instead of the linearization (the weight normalization
/// cancels the common loss_at(K_t) offset, so only relative values matter).
inline AderStepResult ader_update(const AderState& state, const Matrix& grad,
                                  const std::shared_ptr<const SafeDecisionSet>& next_set,
                                  const ProjectionConfig& pcfg = {},
                                  const std::function<double(const Matrix&)>& loss_at = {}) {
    if (state.bases.empty()) throw ConfigError("ader_update: no base learners");
    const PolicyParams combined = ader_combine(state);

    AderStepResult out;
    out.next = state;
    const bool use_full = state.cfg.full_meta_loss && static_cast<bool>(loss_at);
    for (size_t i = 0; i < state.bases.size(); ++i) {
        const double charged =
            use_full ? loss_at(state.bases[i].decision.theta)
                     : surrogate_meta_loss(grad, state.bases[i].decision.theta,
                                           combined.theta);
        out.next.log_w[i] += -state.cfg.eps * charged;
    }
    const std::vector<double> p_new = ader_weights(out.next);
    double zeta = 0.0;
    for (size_t i = 0; i < state.bases.size(); ++i) {
        OgdStepResult r = ogd_step(state.bases[i], grad, next_set, pcfg);
        out.next.bases[i] = std::move(r.next);
        zeta += p_new[i] * r.zeta;
    }
    out.zeta = zeta;
    out.next.step_index = state.step_index + 1;
    return out;
}

} // namespace nsc
