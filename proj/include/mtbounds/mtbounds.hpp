#pragma once

// Umbrella header: robust lower/upper price bounds for forward-start
// straddles from two marginal laws, with the optimal martingale coupling,
// the semi-static hedge, and an LP cross-check.

#include "mtbounds/bounds.hpp"
#include "mtbounds/dual_hedge.hpp"
#include "mtbounds/io.hpp"
#include "mtbounds/lower_coupling.hpp"
#include "mtbounds/measure.hpp"
#include "mtbounds/multiperiod.hpp"
#include "mtbounds/oracle.hpp"
#include "mtbounds/pair.hpp"
#include "mtbounds/piecewise.hpp"
#include "mtbounds/potential.hpp"
#include "mtbounds/quadrature.hpp"
#include "mtbounds/upper_coupling.hpp"
