#pragma once

// Umbrella header.

#include "exdbn/error.hpp"
#include "exdbn/rng.hpp"
#include "exdbn/graph_core.hpp"
#include "exdbn/datagen.hpp"
#include "exdbn/objective.hpp"
#include "exdbn/relaxation.hpp"
#include "exdbn/solver.hpp"
#include "exdbn/oracle.hpp"
#include "exdbn/metrics.hpp"
#include "exdbn/bench.hpp"
