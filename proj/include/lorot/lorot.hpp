#pragma once

// Umbrella header: optimal transport on globally hyperbolic spacetimes for
// the squared time-separation cost, with dual potentials, transport-map
// recovery and regularity diagnostics.

#include "lorot/cost.hpp"
#include "lorot/errors.hpp"
#include "lorot/extended_real.hpp"
#include "lorot/geodesic_flow.hpp"
#include "lorot/io.hpp"
#include "lorot/kantorovich.hpp"
#include "lorot/lagrangian.hpp"
#include "lorot/measure.hpp"
#include "lorot/pipeline.hpp"
#include "lorot/potential.hpp"
#include "lorot/regularity.hpp"
#include "lorot/spacetime.hpp"
#include "lorot/transport.hpp"
