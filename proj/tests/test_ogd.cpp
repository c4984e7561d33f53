#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "nsc/nsc.hpp"

using namespace nsc;
using Catch::Approx;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

LtvSystem scalar_sys() {
    return LtvSystem(Schedule<Matrix>(m1(0.9)), Schedule<Matrix>(m1(0.6)), 0.9, 0.6);
}

QuadraticLoss unit_loss(Eigen::Index dx, Eigen::Index du) {
    return QuadraticLoss(Schedule<Matrix>(Matrix::Identity(dx, dx)),
                         Schedule<Matrix>(Matrix::Identity(du, du)));
}

std::shared_ptr<const SafeDecisionSet> scalar_gain_set(double x, double W) {
    return std::make_shared<SafeDecisionSet>(build_gain_set(
        scalar_sys(), 1, v1(x), Polytope::box(v1(2.0)), Polytope::box(v1(2.5)), W, 5.0, 0.1));
}

/// Random small LTV instance for gradient/convexity property sweeps.
struct GradInstance {
    LtvSystem sys;
    QuadraticLoss loss;
    Vector x, w;
    PolicyParams decision;
};

GradInstance random_instance(std::mt19937_64& rng, bool state_feedback) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> dims(1, 3);
    const Eigen::Index dx = dims(rng), du = dims(rng);
    Matrix A(dx, dx), B(dx, du);
    for (Eigen::Index i = 0; i < dx; ++i) {
        for (Eigen::Index j = 0; j < dx; ++j) A(i, j) = U(rng);
        for (Eigen::Index j = 0; j < du; ++j) B(i, j) = U(rng);
    }
    // random PSD Q and PD R via M'M
    Matrix Mq(dx, dx), Mr(du, du);
    for (Eigen::Index i = 0; i < dx; ++i)
        for (Eigen::Index j = 0; j < dx; ++j) Mq(i, j) = U(rng);
    for (Eigen::Index i = 0; i < du; ++i)
        for (Eigen::Index j = 0; j < du; ++j) Mr(i, j) = U(rng);
    GradInstance gi{
        LtvSystem(Schedule<Matrix>(A), Schedule<Matrix>(B), spectral_norm(A), spectral_norm(B)),
        QuadraticLoss(Schedule<Matrix>(Matrix(Mq.transpose() * Mq)),
                      Schedule<Matrix>(Matrix(Mr.transpose() * Mr + 0.1 * Matrix::Identity(du, du)))),
        Vector(dx), Vector(dx), PolicyParams{}};
    for (Eigen::Index i = 0; i < dx; ++i) {
        gi.x(i) = 2.0 * U(rng);
        gi.w(i) = 0.5 * U(rng);
    }
    if (state_feedback) {
        Matrix K(du, dx);
        for (Eigen::Index i = 0; i < du; ++i)
            for (Eigen::Index j = 0; j < dx; ++j) K(i, j) = 2.0 * U(rng);
        gi.decision = PolicyParams::state_feedback(K);
    } else {
        Vector u(du);
        for (Eigen::Index i = 0; i < du; ++i) u(i) = 2.0 * U(rng);
        gi.decision = PolicyParams::direct_input(u);
    }
    return gi;
}

/// Central finite differences of policy_loss in the decision parameters.
Matrix fd_grad(const GradInstance& gi) {
    const Matrix& th = gi.decision.theta;
    const double h = 1e-6 * (1.0 + th.norm());
    Matrix g(th.rows(), th.cols());
    for (Eigen::Index i = 0; i < th.rows(); ++i) {
        for (Eigen::Index j = 0; j < th.cols(); ++j) {
            PolicyParams hi = gi.decision, lo = gi.decision;
            hi.theta(i, j) += h;
            lo.theta(i, j) -= h;
            g(i, j) = (policy_loss(gi.loss, gi.sys, 1, gi.x, gi.w, hi) -
                       policy_loss(gi.loss, gi.sys, 1, gi.x, gi.w, lo)) /
                      (2.0 * h);
        }
    }
    return g;
}

} // namespace

TEST_CASE("policy_loss scalar examples", "[ogd]") {
    const LtvSystem sys = scalar_sys();
    const QuadraticLoss loss = unit_loss(1, 1);
    // K=1: x+ = 0.3, u = -1 -> 0.09 + 1
    CHECK(policy_loss(loss, sys, 1, v1(1.0), v1(0.0), PolicyParams::state_feedback(m1(1.0))) ==
          Approx(1.09).margin(1e-15));
    // deadbeat gain a - bK = 0: loss is the control term only
    const double k_dead = 0.9 / 0.6;
    CHECK(policy_loss(loss, sys, 1, v1(1.0), v1(0.0),
                      PolicyParams::state_feedback(m1(k_dead))) ==
          Approx(k_dead * k_dead).margin(1e-12));
    // x = 0: loss = w'Qw regardless of K
    for (double k : {-3.0, 0.0, 2.0})
        CHECK(policy_loss(loss, sys, 1, v1(0.0), v1(0.5),
                          PolicyParams::state_feedback(m1(k))) == Approx(0.25).margin(1e-15));
}

TEST_CASE("policy_grad scalar example 1.64", "[ogd]") {
    const Matrix g = policy_grad(unit_loss(1, 1), scalar_sys(), 1, v1(1.0), v1(0.0),
                                 PolicyParams::state_feedback(m1(1.0)));
    REQUIRE(g.rows() == 1);
    REQUIRE(g.cols() == 1);
    // -0.6*2*0.3*1 + 2*1*1 = 1.64
    CHECK(g(0, 0) == Approx(1.64).margin(1e-12));
}

TEST_CASE("policy_grad vanishes at x=0 for gain policies", "[ogd]") {
    const Matrix g = policy_grad(unit_loss(1, 1), scalar_sys(), 1, v1(0.0), v1(0.5),
                                 PolicyParams::state_feedback(m1(1.7)));
    CHECK(g.norm() == 0.0);
}

TEST_CASE("policy_grad matches central differences on 100 random instances",
          "[ogd][property]") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 100; ++i) {
        const GradInstance gi = random_instance(rng, i % 2 == 0);
        const Matrix g = policy_grad(gi.loss, gi.sys, 1, gi.x, gi.w, gi.decision);
        const Matrix g_fd = fd_grad(gi);
        const double scale = std::max(1.0, g_fd.norm());
        REQUIRE((g - g_fd).norm() / scale <= 1e-6);
    }
}

TEST_CASE("policy_loss is convex along 100 random lines", "[ogd][property]") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const GradInstance gi = random_instance(rng, i % 2 == 0);
        Matrix dir(gi.decision.theta.rows(), gi.decision.theta.cols());
        for (Eigen::Index r = 0; r < dir.rows(); ++r)
            for (Eigen::Index c = 0; c < dir.cols(); ++c) dir(r, c) = U(rng);
        PolicyParams a = gi.decision, b = gi.decision, mid = gi.decision;
        a.theta += dir;
        b.theta -= dir;
        mid.theta = 0.5 * (a.theta + b.theta);
        const double fa = policy_loss(gi.loss, gi.sys, 1, gi.x, gi.w, a);
        const double fb = policy_loss(gi.loss, gi.sys, 1, gi.x, gi.w, b);
        const double fm = policy_loss(gi.loss, gi.sys, 1, gi.x, gi.w, mid);
        REQUIRE(fm <= 0.5 * (fa + fb) + 1e-12);
    }
}

TEST_CASE("default_step_size examples", "[ogd]") {
    CHECK(default_step_size(100, 1.0, 1.0) == Approx(0.1).margin(1e-18));
    CHECK(default_step_size(400, 2.0, 1.0) == Approx(0.1).margin(1e-18));
    const double e1 = default_step_size(500, 1.3, 2.1);
    const double e4 = default_step_size(2000, 1.3, 2.1);
    CHECK(e4 == Approx(0.5 * e1).epsilon(1e-14));
    CHECK_THROWS_AS(default_step_size(0, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(default_step_size(10, -1.0, 1.0), ConfigError);
}

TEST_CASE("ogd_step: interior update with identical sets", "[ogd]") {
    const auto set = scalar_gain_set(1.0, 1.0);  // [0, 2.5]
    OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), set, 0.1, {}, m1(1.0));
    REQUIRE(st.decision.theta(0, 0) == Approx(1.0).margin(1e-12));
    const auto r = ogd_step(st, m1(1.64), set);
    CHECK(r.next.decision.theta(0, 0) == Approx(0.836).margin(1e-12));
    CHECK(r.zeta == 0.0);
    CHECK(r.next.step_index == st.step_index + 1);
}

TEST_CASE("ogd_step: boundary clip", "[ogd]") {
    const auto set = scalar_gain_set(1.0, 1.0);
    OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), set, 0.1, {}, m1(0.1));
    const auto r = ogd_step(st, m1(2.0), set);  // z' = 0.1 - 0.2 = -0.1 -> clipped to 0
    CHECK(r.next.decision.theta(0, 0) == Approx(0.0).margin(1e-12));
    CHECK(r.zeta == 0.0);  // same set on both sides
}

TEST_CASE("ogd_step: zeta measures the moving feasible set", "[ogd]") {
    // last set [0, 2.5] (x=1), next set [1.5, 2.5] (W=2): z' below both lower
    // ends lands on 0 vs 1.5 -> zeta = 1.5
    const auto last = scalar_gain_set(1.0, 1.0);
    const auto next = scalar_gain_set(1.0, 2.0);
    OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), last, 0.1, {}, m1(0.1));
    const auto r = ogd_step(st, m1(2.0), next);  // z' = -0.1
    CHECK(r.next.decision.theta(0, 0) == Approx(1.5).margin(1e-12));
    CHECK(r.zeta == Approx(1.5).margin(1e-12));
}

TEST_CASE("ogd runs keep every iterate feasible", "[ogd][property]") {
    // drive the scalar learner along a trajectory of moving sets and check
    // decision membership within 1e-7 at every step
    const LtvSystem sys = scalar_sys();
    const QuadraticLoss loss = unit_loss(1, 1);
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> Uw(-1.0, 1.0);

    Vector x = v1(1.0);
    auto set = scalar_gain_set(x(0), 1.0);
    OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), set,
                           default_step_size(200, 1.0, 1.0));
    REQUIRE(set_contains(*set, flatten_rm(st.decision.theta), 1e-7));

    for (long t = 1; t <= 200; ++t) {
        const Vector w = v1(Uw(rng));
        const Matrix g = policy_grad(loss, sys, t, x, w, st.decision);
        x = step_ltv(sys, t, x, Vector(-st.decision.theta * x), w);
        const auto next = scalar_gain_set(x(0), 1.0);
        const auto r = ogd_step(st, g, next);
        st = r.next;
        REQUIRE(set_contains(*next, flatten_rm(st.decision.theta), 1e-7));
        REQUIRE(polytope_contains(Polytope::box(v1(2.0)), x, 1e-9));
    }
}

TEST_CASE("ogd determinism: identical inputs, identical state sequences", "[ogd]") {
    auto run = [](std::vector<double>& decisions) {
        const LtvSystem sys = scalar_sys();
        const QuadraticLoss loss = unit_loss(1, 1);
        Vector x = v1(1.0);
        auto set = scalar_gain_set(x(0), 1.0);
        OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), set, 0.05);
        for (long t = 1; t <= 50; ++t) {
            const Vector w = sample_noise(NoiseSpec{NoiseKind::Uniform}, 1.0, 1, 7, t);
            const Matrix g = policy_grad(loss, sys, t, x, w, st.decision);
            x = step_ltv(sys, t, x, Vector(-st.decision.theta * x), w);
            const auto next = scalar_gain_set(x(0), 1.0);
            st = ogd_step(st, g, next).next;
            decisions.push_back(st.decision.theta(0, 0));
        }
    };
    std::vector<double> a, b;
    run(a);
    run(b);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("init_ogd projects the zero decision into the first set", "[ogd]") {
    // set [1.5, 2.5]: witness is the projection of 0 -> 1.5
    const auto set = scalar_gain_set(1.0, 2.0);
    const OgdState st = init_ogd(PolicyParams::state_feedback(m1(0.0)), set, 0.1);
    CHECK(st.decision.theta(0, 0) == Approx(1.5).margin(1e-12));
    CHECK(st.step_index == 1);
    CHECK_THROWS_AS(init_ogd(PolicyParams::state_feedback(m1(0.0)), set, 0.0), ConfigError);
    CHECK_THROWS_AS(init_ogd(PolicyParams::state_feedback(m1(0.0)), nullptr, 0.1), ConfigError);
}

TEST_CASE("estimate_gradient_bound is positive, finite, and deterministic", "[ogd]") {
    const LtvSystem sys = scalar_sys();
    const OneStepModel model = make_view(sys);
    const QuadraticLoss loss = unit_loss(1, 1);
    const double g1 = estimate_gradient_bound(loss, model, Polytope::box(v1(2.0)),
                                                      Polytope::box(v1(2.5)), 1.0, 5.0,
                                                      PolicyKind::StateFeedback);
    const double g2 = estimate_gradient_bound(loss, model, Polytope::box(v1(2.0)),
                                                      Polytope::box(v1(2.5)), 1.0, 5.0,
                                                      PolicyKind::StateFeedback);
    REQUIRE(g1 > 0.0);
    REQUIRE(std::isfinite(g1));
    REQUIRE(g1 == g2);
    // the scalar worst case is comfortably above the |grad| at K=1, x=1, w=0
    REQUIRE(g1 >= 1.64);
}
