#pragma once

// Umbrella header: the whole operator laboratory.
//
// Kernels here are finitely supported sequences on the integers. The library
// builds rough truncated Hilbert-transform kernels from fractional-power
// arithmetic progressions, assembles single-scale blocks into full or
// gap-band operators, verifies building-block (size/regularity) axioms,
// re-blocks arbitrary kernels into mean-free dyadic families, inverts
// lambda*I + H through its symbol, fits three-term expansions of resolvents,
// measures weak-l1 quasinorms, and runs the dyadic stopping-time
// decomposition with full invariant verification.

#include "rhlab/params.hpp"
#include "rhlab/bumps.hpp"
#include "rhlab/fft.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/blocks.hpp"
#include "rhlab/cz.hpp"
#include "rhlab/resolvent.hpp"
#include "rhlab/weaktype.hpp"
#include "rhlab/report.hpp"
