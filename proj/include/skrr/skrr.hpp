#pragma once

// Sketched kernel ridge regression toolkit: accumulated sub-sampling
// sketches, exact and sketched KRR solvers, spectral diagnostics and the
// experiment harness.

#include "skrr/harness.hpp"
#include "skrr/kernel.hpp"
#include "skrr/rng.hpp"
#include "skrr/sketch.hpp"
#include "skrr/solver.hpp"
#include "skrr/spectral.hpp"
#include "skrr/synthdata.hpp"
