#pragma once

// Umbrella header: safe online control under bounded adversarial noise.
//
//   types / schedule   plants, polytopes, losses, policy parameterizations
//   safe_set           one-step safe gain sets and DCBF input sets
//   projection         Dykstra projections onto intersections, plus oracles
//   ogd / ader         projected OGD over time-varying sets; expert ensemble
//   metrics            run logs, comparators, dynamic regret, LQR baseline
//   noise              bounded noise menu with counter-based seeding
//   scenario / config  experiment descriptions, file format, run loop
//   csv / chart / report   artifacts written by the command-line tool

#include "nsc/errors.hpp"
#include "nsc/linalg.hpp"
#include "nsc/schedule.hpp"
#include "nsc/types.hpp"
#include "nsc/decision_set.hpp"
#include "nsc/projection.hpp"
#include "nsc/safe_set.hpp"
#include "nsc/ogd.hpp"
#include "nsc/ader.hpp"
#include "nsc/metrics.hpp"
#include "nsc/noise.hpp"
#include "nsc/scenario.hpp"
#include "nsc/config.hpp"
#include "nsc/csv.hpp"
#include "nsc/chart.hpp"
#include "nsc/report.hpp"
