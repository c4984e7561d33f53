// Minimal end-to-end example: a scalar plant with box constraints, Safe-OGD
// over feedback gains, and a cumulative-loss printout.  Mirrors the README.

#include <iostream>

#include "nsc/nsc.hpp"

int main() {
    using namespace nsc;

    // x' = 0.9 x + 0.6 u + w, |x| <= 2, |u| <= 2.5, ||w|| <= 1
    ScenarioConfig cfg;
    cfg.name = "quickstart";
    cfg.ltv = LtvSystem(Schedule<Matrix>(Matrix::Constant(1, 1, 0.9)),
                        Schedule<Matrix>(Matrix::Constant(1, 1, 0.6)), 0.9, 0.6);
    cfg.state_con = Polytope::box(Vector::Constant(1, 2.0));
    cfg.input_con = Polytope::box(Vector::Constant(1, 2.5));
    cfg.W = 1.0;
    cfg.loss = QuadraticLoss(Schedule<Matrix>(Matrix::Identity(1, 1)),
                             Schedule<Matrix>(Matrix::Identity(1, 1)));
    cfg.algo.alpha = 1.0;
    cfg.algo.D_f = 1.0;
    cfg.algo.G_f = 1.0;
    cfg.T = 100;
    cfg.x1 = Vector::Constant(1, 1.0);

    NoiseSpec noise;
    noise.kind = NoiseKind::Uniform;
    noise.a = -1.0;
    noise.b = 1.0;

    for (AlgoKind algo : {AlgoKind::SafeOgd, AlgoKind::SafeAder, AlgoKind::Lqr}) {
        const RunLog log = run_scenario(cfg, algo, noise, /*seed=*/1);
        std::cout << to_string(algo) << ": cumulative loss = " << log.cumulative_loss()
                  << ", all constraints held = " << (log.all_safe() ? "yes" : "no") << "\n";
    }
    return 0;
}
