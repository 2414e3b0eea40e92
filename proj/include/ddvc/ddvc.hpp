#pragma once

// Umbrella header.

#include "ddvc/baseline.hpp"
#include "ddvc/config.hpp"
#include "ddvc/control.hpp"
#include "ddvc/csv.hpp"
#include "ddvc/datarep.hpp"
#include "ddvc/dictionary.hpp"
#include "ddvc/errors.hpp"
#include "ddvc/lmi.hpp"
#include "ddvc/pipeline.hpp"
#include "ddvc/plants.hpp"
#include "ddvc/rng.hpp"
#include "ddvc/scheduling.hpp"
#include "ddvc/solver_barrier.hpp"
#include "ddvc/solver_projection.hpp"
#include "ddvc/synthesis.hpp"
#include "ddvc/velocity.hpp"
