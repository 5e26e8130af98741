#pragma once

#include "phasewitness/core.hpp"
#include "phasewitness/density.hpp"
#include "phasewitness/densities.hpp"
#include "phasewitness/discretization.hpp"
#include "phasewitness/majorization.hpp"
#include "phasewitness/optimize.hpp"
#include "phasewitness/parallel.hpp"
#include "phasewitness/quadrature.hpp"
#include "phasewitness/report.hpp"
#include "phasewitness/sampling.hpp"
#include "phasewitness/state_spec.hpp"
#include "phasewitness/witnesses.hpp"
