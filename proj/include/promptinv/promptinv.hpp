#pragma once

#include "promptinv/block_io.hpp"
#include "promptinv/error.hpp"
#include "promptinv/generator.hpp"
#include "promptinv/gradcheck.hpp"
#include "promptinv/linalg.hpp"
#include "promptinv/lm_prior.hpp"
#include "promptinv/metrics.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/optimizers.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"
#include "promptinv/harness/benchmark.hpp"
#include "promptinv/harness/caption.hpp"
#include "promptinv/harness/config.hpp"
#include "promptinv/harness/results_io.hpp"
#include "promptinv/harness/summary.hpp"
#include "promptinv/harness/synthetic_world.hpp"
