#pragma once

/// Umbrella header for the affgeo library.

#include "affgeo/errors.hpp"
#include "affgeo/symexpr.hpp"
#include "affgeo/affine.hpp"
#include "affgeo/duality.hpp"
#include "affgeo/sampling.hpp"
#include "affgeo/report.hpp"
#include "affgeo/brackets.hpp"
#include "affgeo/phase.hpp"
#include "affgeo/mechanics.hpp"
#include "affgeo/scenario.hpp"
#include "affgeo/suites.hpp"
