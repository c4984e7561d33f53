#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nsc/ader.hpp"
#include "nsc/errors.hpp"
#include "nsc/metrics.hpp"
#include "nsc/noise.hpp"
#include "nsc/ogd.hpp"
#include "nsc/safe_set.hpp"
#include "nsc/types.hpp"

namespace nsc {

// ============================ Registered plants =============================

/// One Euler step of the torque-limited pendulum (angle measured from the
/// upright target):
///   theta'    = theta + dt thetadot + w1
///   thetadot' = thetadot + dt ( (3g/2l) sin theta + (3/(m l^2)) u ) + w2
/// `literal` reproduces the source text's printed velocity update
/// (thetadot' = (3g/2l) sin theta + (3 dt/(m l^2)) u + w2), which drops the
/// velocity carry-over and the timestep on gravity; it is kept only for
/// side-by-side comparison.
struct PendulumParams {
    double g = 10.0;
    double m = 1.0;
    double l = 1.0;
    double dt = 0.05;
};

inline Vector pendulum_step(double theta, double thetadot, double u, const Vector& w,
                            const PendulumParams& p = {}, bool literal = false) {
    if (w.size() != 2) throw DimensionError("pendulum_step: noise must be a 2-vector");
    const double grav = (3.0 * p.g / (2.0 * p.l)) * std::sin(theta);
    const double gain = 3.0 / (p.m * p.l * p.l);
    Vector next(2);
    next(0) = theta + p.dt * thetadot + w(0);
    next(1) = literal ? grav + p.dt * gain * u + w(1)
                      : thetadot + p.dt * (grav + gain * u) + w(1);
    return next;
}

inline ControlAffineSystem make_pendulum(const PendulumParams& p = {}, bool literal = false) {
    ControlAffineSystem sys;
    sys.dx = 2;
    sys.du = 1;
    sys.name = literal ? "pendulum-literal" : "pendulum";
    sys.f = [p, literal](const Vector& x) {
        Vector fx(2);
        const double grav = (3.0 * p.g / (2.0 * p.l)) * std::sin(x(0));
        fx(0) = x(0) + p.dt * x(1);
        fx(1) = literal ? grav : x(1) + p.dt * grav;
        return fx;
    };
    sys.g = [p](const Vector&) {
        // the printed and corrected velocity updates share the same input
        // coefficient 3 dt / (m l^2); only the drift term differs
        Matrix gx(2, 1);
        gx(0, 0) = 0.0;
        gx(1, 0) = p.dt * 3.0 / (p.m * p.l * p.l);
        return gx;
    };
    return sys;
}

/// Control-affine plants constructible by name from a scenario file.
using AffineFactory =
    std::function<ControlAffineSystem(const std::map<std::string, double>&, bool literal)>;

inline std::map<std::string, AffineFactory>& affine_registry() {
    static std::map<std::string, AffineFactory> reg = [] {
        std::map<std::string, AffineFactory> r;
        r["pendulum"] = [](const std::map<std::string, double>& prm, bool literal) {
            PendulumParams p;
            auto pick = [&](const char* k, double dflt) {
                auto it = prm.find(k);
                return it == prm.end() ? dflt : it->second;
            };
            p.g = pick("g", p.g);
            p.m = pick("m", p.m);
            p.l = pick("l", p.l);
            p.dt = pick("dt", p.dt);
            return make_pendulum(p, literal);
        };
        return r;
    }();
    return reg;
}

// ============================ Scenario config ===============================

enum class AlgoKind { SafeOgd, SafeAder, Lqr, GreedyOracle };

inline const char* to_string(AlgoKind a) {
    switch (a) {
        case AlgoKind::SafeOgd: return "safe-ogd";
        case AlgoKind::SafeAder: return "safe-ader";
        case AlgoKind::Lqr: return "lqr";
        case AlgoKind::GreedyOracle: return "greedy-oracle";
    }
    return "?";
}

inline AlgoKind algo_kind_from_string(const std::string& s) {
    if (s == "safe-ogd" || s == "ogd") return AlgoKind::SafeOgd;
    if (s == "safe-ader" || s == "ader") return AlgoKind::SafeAder;
    if (s == "lqr" || s == "h2") return AlgoKind::Lqr;
    if (s == "greedy-oracle" || s == "oracle") return AlgoKind::GreedyOracle;
    throw ConfigError("unknown algorithm '" + s + "'");
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "state-feedback" || s == "gain") return PolicyKind::StateFeedback;
    if (s == "direct" || s == "input") return PolicyKind::DirectInput;
    if (s == "disturbance-action" || s == "dac") return PolicyKind::DisturbanceAction;
    throw ConfigError("unknown policy kind '" + s + "'");
}

/// Learner/baseline knobs.  eta, D_f, G_f interact as follows: an explicit
/// eta wins for OGD; otherwise eta = D_f/(G_f sqrt(T)).  The expert grid
/// always derives from (D_f, G_f, T).  Missing D_f falls back to
/// 2 kappa sqrt(min(du,dx)); missing G_f to the empirical bound.
struct AlgorithmParams {
    PolicyKind policy = PolicyKind::StateFeedback;
    double kappa = 5.0;    ///< decision norm cap
    double gamma = 0.1;    ///< closed-loop contraction margin (gain sets)
    double alpha = 0.5;    ///< barrier decay rate (input sets)
    std::optional<double> eta;
    std::optional<double> D_f;
    std::optional<double> G_f;
    int horizon_H = 1;     ///< disturbance-action depth
    std::optional<Matrix> init_decision;
    bool row_norm_tightening = true;
    bool ader_full_meta = false;  ///< charge experts the full loss, not its linearization
};

/// A full experiment description: plant, constraints, loss, learner knobs,
/// noise menu, and run geometry.
struct ScenarioConfig {
    std::string name;

    bool is_ltv = true;
    std::optional<LtvSystem> ltv;
    std::string affine_name;
    std::map<std::string, double> affine_params;
    std::optional<ControlAffineSystem> affine;

    Schedule<Polytope> state_con;
    Schedule<Polytope> input_con;
    double W = 0.0;

    QuadraticLoss loss;
    AlgorithmParams algo;
    AlgoKind algo_kind = AlgoKind::SafeOgd;  ///< default learner; CLI may override

    std::vector<NoiseSpec> noise_menu;
    std::vector<std::string> noise_names;

    long T = 0;
    Vector x1;
    long seed_lo = 1, seed_hi = 5;
    std::string out_dir = "out";

    const NoiseSpec& spec_for(const std::string& dist) const {
        for (size_t i = 0; i < noise_names.size(); ++i)
            if (noise_names[i] == dist) return noise_menu[i];
        throw ConfigError("scenario '" + name + "' lists no distribution '" + dist + "'");
    }

    OneStepModel model() const {
        if (is_ltv) {
            if (!ltv) throw ConfigError("scenario: LTV plant missing");
            return make_view(*ltv);
        }
        if (!affine) throw ConfigError("scenario: affine plant unresolved");
        return make_view(*affine);
    }
};

// ============================ Run loop ======================================

namespace detail {

/// Resolve (D_f, G_f) for a scenario, filling gaps with the documented
/// defaults.  The empirical gradient bound is deterministic (fixed probe
/// seed), so resolved step sizes are reproducible.
inline std::pair<double, double> resolve_df_gf(const ScenarioConfig& cfg) {
    const OneStepModel model = cfg.model();
    double D = cfg.algo.D_f.value_or(
        2.0 * cfg.algo.kappa *
        std::sqrt(static_cast<double>(std::min(model.du, std::max<Eigen::Index>(model.dx, 1)))));
    double G;
    if (cfg.algo.G_f) {
        G = *cfg.algo.G_f;
    } else {
        G = estimate_gradient_bound(cfg.loss, model, cfg.state_con.at(1), cfg.input_con.at(1),
                                    cfg.W, cfg.algo.kappa, cfg.algo.policy,
                                    cfg.algo.horizon_H);
    }
    return {D, G};
}

/// Feasible decision set for playing at step t from state x, per policy kind.
inline std::shared_ptr<const SafeDecisionSet> build_decision_set(
    const ScenarioConfig& cfg, long t, const Vector& x, const std::vector<Vector>& history) {
    SafeSetOptions opts;
    opts.row_norm_tightening = cfg.algo.row_norm_tightening;
    const Polytope now = cfg.state_con.at(t);
    const Polytope next = cfg.state_con.at(t + 1);
    const Polytope inp = cfg.input_con.at(t);

    if (cfg.algo.policy == PolicyKind::StateFeedback && cfg.is_ltv) {
        return std::make_shared<SafeDecisionSet>(build_gain_set(
            *cfg.ltv, t, x, next, inp, cfg.W, cfg.algo.kappa, cfg.algo.gamma, opts));
    }
    const OneStepModel model = cfg.model();
    SafeDecisionSet U = build_input_set_dcbf(model.phi(t, x), model.G(t, x), x, now, next, inp,
                                             cfg.W, CbfParams(cfg.algo.alpha), opts);
    if (cfg.algo.policy == PolicyKind::DirectInput)
        return std::make_shared<SafeDecisionSet>(std::move(U));
    PolicyParams shape;
    shape.kind = cfg.algo.policy;
    shape.du = model.du;
    shape.dx = model.dx;
    shape.horizon = cfg.algo.horizon_H;
    return std::make_shared<SafeDecisionSet>(
        substitute_policy(U, shape, x, history, cfg.algo.kappa));
}

inline PolicyParams empty_policy(const ScenarioConfig& cfg) {
    const OneStepModel model = cfg.model();
    PolicyParams p;
    p.kind = cfg.algo.policy;
    p.du = model.du;
    p.dx = model.dx;
    switch (cfg.algo.policy) {
        case PolicyKind::DirectInput: p.theta = Matrix::Zero(model.du, 1); p.dx = 0; break;
        case PolicyKind::StateFeedback: p.theta = Matrix::Zero(model.du, model.dx); break;
        case PolicyKind::DisturbanceAction:
            p.horizon = cfg.algo.horizon_H;
            p.theta = Matrix::Zero(cfg.algo.horizon_H * model.du, model.dx);
            break;
    }
    return p;
}

} // namespace detail

/// Execute one run of `algo` on the scenario under the given noise stream.
/// Throws ConfigError for inconsistent setups and NumericalError when an
/// iterative routine fails.  An infeasible *initial* state violates the
/// problem's standing assumption and throws SafeSetEmpty; a safe set that
/// vanishes mid-run instead stops the run early and returns the partial log
/// with `aborted` set (an aborted run never counts as safe).
inline RunLog run_scenario(const ScenarioConfig& cfg, AlgoKind algo, const NoiseSpec& noise,
                           std::uint64_t seed, const ProjectionConfig& pcfg = {}) {
    if (cfg.T < 1) throw ConfigError("run_scenario: horizon T must be >= 1");
    const OneStepModel model = cfg.model();
    if (cfg.x1.size() != model.dx) throw ConfigError("run_scenario: x1 dim vs plant dx");
    if (!polytope_contains(cfg.state_con.at(1), cfg.x1, 1e-9))
        throw SafeSetEmpty("run_scenario: initial state violates the step-1 state polytope");

    SafeSetOptions opts;
    opts.row_norm_tightening = cfg.algo.row_norm_tightening;

    RunLog log;
    log.states.push_back(cfg.x1);
    Vector x = cfg.x1;
    std::vector<Vector> history;  // most recent first; disturbance-action policies read it

    // --- learner-independent per-step bookkeeping -------------------------
    auto record = [&](long t, const Vector& u, const Vector& w, double loss_t, double zeta) {
        log.inputs.push_back(u);
        log.noises.push_back(w);
        log.losses.push_back(loss_t);
        log.zetas.push_back(zeta);
        log.safe_input.push_back(
            polytope_contains(cfg.input_con.at(t), u, 1e-9) ? 1 : 0);
    };
    auto advance = [&](long t, const Vector& u, const Vector& w) {
        const Vector x_next = model.phi(t, x) + model.G(t, x) * u + w;
        log.states.push_back(x_next);
        log.safe_state.push_back(
            polytope_contains(cfg.state_con.at(t + 1), x_next, 1e-9) ? 1 : 0);
        return x_next;
    };

    try {
        if (algo == AlgoKind::SafeOgd || algo == AlgoKind::SafeAder) {
            const auto [D_f, G_f] = detail::resolve_df_gf(cfg);
            const PolicyParams shape = detail::empty_policy(cfg);
            auto set_now = detail::build_decision_set(cfg, 1, x, history);

            std::optional<OgdState> ogd;
            std::optional<AderState> ader;
            if (algo == AlgoKind::SafeOgd) {
                const double eta =
                    cfg.algo.eta ? *cfg.algo.eta : default_step_size(cfg.T, D_f, G_f);
                ogd = init_ogd(shape, set_now, eta, pcfg, cfg.algo.init_decision);
            } else {
                AderConfig acfg = make_ader_config(cfg.T, D_f, G_f);
                acfg.full_meta_loss = cfg.algo.ader_full_meta;
                ader = init_ader(acfg, shape, set_now, pcfg, cfg.algo.init_decision);
            }

            for (long t = 1; t <= cfg.T; ++t) {
                const Vector x_prev = x;
                const PolicyParams decision = ogd ? ogd->decision : ader_combine(*ader);
                const Vector u = policy_to_input(decision, x, history, /*zero_pad=*/true);
                const Vector w = sample_noise(noise, cfg.W, model.dx, seed, t);
                const Vector x_next = advance(t, u, w);
                // the learner recovers the noise from the observed transition
                const Vector w_rec = x_next - model.phi(t, x) - model.G(t, x) * u;
                const double loss_t = loss_eval(cfg.loss, t, x_next, u);
                const Matrix grad =
                    policy_grad(cfg.loss, model, t, x, w_rec, decision, history, true);

                // record first so an update that aborts leaves a consistent log
                record(t, u, w, loss_t, 0.0);
                x = x_next;
                if (t < cfg.T) {
                    // the policy for step t+1 must be feasible at the state
                    // where it will be played
                    std::vector<Vector> hist_next;
                    hist_next.push_back(w_rec);
                    for (const Vector& h : history) hist_next.push_back(h);
                    auto set_next = detail::build_decision_set(cfg, t + 1, x_next, hist_next);
                    if (ogd) {
                        OgdStepResult r = ogd_step(*ogd, grad, set_next, pcfg);
                        ogd = std::move(r.next);
                        log.zetas.back() = r.zeta;
                    } else {
                        std::function<double(const Matrix&)> loss_at;
                        if (cfg.algo.ader_full_meta) {
                            PolicyParams probe = decision;
                            loss_at = [&, probe, x_prev](const Matrix& th) mutable {
                                probe.theta = th;
                                return policy_loss(cfg.loss, model, t, x_prev, w_rec, probe,
                                                   history, true);
                            };
                        }
                        AderStepResult r = ader_update(*ader, grad, set_next, pcfg, loss_at);
                        ader = std::move(r.next);
                        log.zetas.back() = r.zeta;
                    }
                    history.insert(history.begin(), w_rec);
                    if (history.size() > 64) history.pop_back();
                }
            }
        } else if (algo == AlgoKind::Lqr) {
            if (!cfg.is_ltv)
                throw ConfigError("run_scenario: the LQR baseline needs an LTV plant");
            const LqrSolution sol =
                lqr_gain(cfg.ltv->A_at(1), cfg.ltv->B_at(1), cfg.loss.Q_at(1), cfg.loss.R_at(1));
            for (long t = 1; t <= cfg.T; ++t) {
                const SafeDecisionSet U =
                    build_input_set_dcbf(*cfg.ltv, t, x, cfg.state_con.at(t),
                                         cfg.state_con.at(t + 1), cfg.input_con.at(t), cfg.W,
                                         CbfParams(cfg.algo.alpha), opts);
                const Vector u = project_set(U, Vector(-sol.K * x), pcfg);
                const Vector w = sample_noise(noise, cfg.W, model.dx, seed, t);
                const Vector x_next = advance(t, u, w);
                record(t, u, w, loss_eval(cfg.loss, t, x_next, u), 0.0);
                x = x_next;
            }
        } else {  // GreedyOracle: per-step clairvoyant minimizer over the safe set
            for (long t = 1; t <= cfg.T; ++t) {
                const Vector phi = model.phi(t, x);
                const Matrix G = model.G(t, x);
                const SafeDecisionSet U =
                    build_input_set_dcbf(phi, G, x, cfg.state_con.at(t), cfg.state_con.at(t + 1),
                                         cfg.input_con.at(t), cfg.W, CbfParams(cfg.algo.alpha),
                                         opts);
                const Vector w = sample_noise(noise, cfg.W, model.dx, seed, t);
                const Vector u = detail::min_quadratic_over_set(cfg.loss, t, phi, G, w, U, pcfg);
                const Vector x_next = advance(t, u, w);
                record(t, u, w, loss_eval(cfg.loss, t, x_next, u), 0.0);
                x = x_next;
            }
        }
    } catch (const SafeSetEmpty& e) {
        log.aborted = true;
        log.abort_reason = e.what();
    }

    log.validate();
    return log;
}

/// Comparator convenience wrapper with the scenario's own safety rules.
inline ComparatorTrajectory scenario_comparator(const ScenarioConfig& cfg, const RunLog& log,
                                                ComparatorMode mode = ComparatorMode::FromActual,
                                                const ProjectionConfig& pcfg = {}) {
    SafeSetOptions opts;
    opts.row_norm_tightening = cfg.algo.row_norm_tightening;
    return greedy_comparator(log, cfg.model(), cfg.loss, cfg.state_con, cfg.input_con, cfg.W,
                             cfg.algo.alpha, mode, pcfg, opts);
}

} // namespace nsc
