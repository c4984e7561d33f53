#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"

namespace nsc {

// ====================== Deterministic counter-based RNG =====================

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Fresh engine for stream (seed, t): draws at step t never depend on how
/// many draws earlier steps consumed, so runs are reproducible under any
/// scheduling and the noise prefix is shared across horizons.
inline std::mt19937_64 engine_at(std::uint64_t seed, long t) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(t))));
}

} // namespace detail

// ============================ Distributions =================================

enum class NoiseKind { Gaussian, Uniform, Gamma, Beta, Exponential, Weibull, Laplace };

inline const char* to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Uniform: return "uniform";
        case NoiseKind::Gamma: return "gamma";
        case NoiseKind::Beta: return "beta";
        case NoiseKind::Exponential: return "exponential";
        case NoiseKind::Weibull: return "weibull";
        case NoiseKind::Laplace: return "laplace";
    }
    return "?";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gaussian" || s == "normal") return NoiseKind::Gaussian;
    if (s == "uniform") return NoiseKind::Uniform;
    if (s == "gamma") return NoiseKind::Gamma;
    if (s == "beta") return NoiseKind::Beta;
    if (s == "exponential") return NoiseKind::Exponential;
    if (s == "weibull") return NoiseKind::Weibull;
    if (s == "laplace") return NoiseKind::Laplace;
    throw ConfigError("unknown noise distribution '" + s + "'");
}

/// Sampling recipe for the per-step noise.  Components are drawn i.i.d. from
/// the named family, shifted by the centering offset, and the resulting
/// vector is clipped to the admissible ball ||w|| <= W (the adversary's
/// budget is a hard bound; the distribution only shapes what it plays).
///
/// Parameter meanings by family (a, b):
///   Gaussian     mean, stddev          Uniform   lo, hi
///   Gamma        shape k, scale theta  Beta      alpha, beta on [lo, hi]
///   Exponential  rate                  Weibull   shape k, scale lambda
///   Laplace      location, scale
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    double a = 0.0;
    double b = 1.0;
    double lo = -1.0;  ///< Beta support mapping only
    double hi = 1.0;

    enum class Centering { Mean, None, Custom };
    Centering centering = Centering::Mean;
    double custom_offset = 0.0;

    /// Analytic mean of the (un-centered) distribution.
    double mean() const {
        switch (kind) {
            case NoiseKind::Gaussian: return a;
            case NoiseKind::Uniform: return 0.5 * (a + b);
            case NoiseKind::Gamma: return a * b;
            case NoiseKind::Beta: return lo + (hi - lo) * a / (a + b);
            case NoiseKind::Exponential: return 1.0 / a;
            case NoiseKind::Weibull: return b * std::tgamma(1.0 + 1.0 / a);
            case NoiseKind::Laplace: return a;
        }
        throw Error("NoiseSpec::mean: unreachable");
    }

    double offset() const {
        switch (centering) {
            case Centering::Mean: return mean();
            case Centering::None: return 0.0;
            case Centering::Custom: return custom_offset;
        }
        throw Error("NoiseSpec::offset: unreachable");
    }

    void validate() const {
        switch (kind) {
            case NoiseKind::Gaussian:
                if (!(b >= 0.0)) throw ConfigError("gaussian noise: stddev must be >= 0");
                break;
            case NoiseKind::Uniform:
                if (!(b >= a)) throw ConfigError("uniform noise: hi must be >= lo");
                break;
            case NoiseKind::Gamma:
                if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("gamma noise: k, theta > 0");
                break;
            case NoiseKind::Beta:
                if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("beta noise: alpha, beta > 0");
                if (!(hi > lo)) throw ConfigError("beta noise: hi must be > lo");
                break;
            case NoiseKind::Exponential:
                if (!(a > 0.0)) throw ConfigError("exponential noise: rate > 0");
                break;
            case NoiseKind::Weibull:
                if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("weibull noise: k, lambda > 0");
                break;
            case NoiseKind::Laplace:
                if (!(b > 0.0)) throw ConfigError("laplace noise: scale > 0");
                break;
        }
    }
};

namespace detail {

inline double draw_component(const NoiseSpec& spec, std::mt19937_64& eng) {
    switch (spec.kind) {
        case NoiseKind::Gaussian:
            return std::normal_distribution<double>(spec.a, spec.b)(eng);
        case NoiseKind::Uniform:
            return std::uniform_real_distribution<double>(spec.a, spec.b)(eng);
        case NoiseKind::Gamma:
            return std::gamma_distribution<double>(spec.a, spec.b)(eng);
        case NoiseKind::Beta: {
            // Beta(a,b) = X/(X+Y) for independent Gammas with unit scale
            const double x = std::gamma_distribution<double>(spec.a, 1.0)(eng);
            const double y = std::gamma_distribution<double>(spec.b, 1.0)(eng);
            const double frac = (x + y > 0.0) ? x / (x + y) : 0.5;
            return spec.lo + (spec.hi - spec.lo) * frac;
        }
        case NoiseKind::Exponential:
            return std::exponential_distribution<double>(spec.a)(eng);
        case NoiseKind::Weibull:
            return std::weibull_distribution<double>(spec.a, spec.b)(eng);
        case NoiseKind::Laplace: {
            // inverse CDF; the stdlib has no Laplace distribution
            const double u =
                std::uniform_real_distribution<double>(-0.5, 0.5)(eng);
            const double s = (u < 0.0) ? -1.0 : 1.0;
            return spec.a - spec.b * s * std::log1p(-2.0 * std::abs(u));
        }
    }
    throw Error("draw_component: unreachable");
}

} // namespace detail

/// Noise vector for step t of the stream `seed`: dx i.i.d. components,
/// centered, then clipped to the ball ||w|| <= W.  Deterministic in
/// (spec, W, dx, seed, t) alone.
inline Vector sample_noise(const NoiseSpec& spec, double W, Eigen::Index dx,
                           std::uint64_t seed, long t) {
    spec.validate();
    if (W < 0.0) throw DimensionError("sample_noise: W must be >= 0");
    if (dx < 1) throw DimensionError("sample_noise: dx must be >= 1");
    std::mt19937_64 eng = detail::engine_at(seed, t);
    Vector w(dx);
    const double off = spec.offset();
    for (Eigen::Index j = 0; j < dx; ++j) w(j) = detail::draw_component(spec, eng) - off;
    // Clip to the ball.  One rescale can overshoot by an ulp (the quotient
    // W/n rounds up), so re-check and, if rounding still resists, shave a
    // hair below W — the contract ||w|| <= W must hold exactly.
    double n = w.norm();
    for (int pass = 0; pass < 3 && n > W && n > 0.0; ++pass) {
        w *= W / n;
        n = w.norm();
    }
    if (n > W && n > 0.0) w *= (W / n) * (1.0 - 1e-15);
    return w;
}

} // namespace nsc
