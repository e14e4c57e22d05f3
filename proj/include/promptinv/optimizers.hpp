#pragma once

#include "promptinv/optimizers/autodan.hpp"
#include "promptinv/optimizers/common.hpp"
#include "promptinv/optimizers/gcg.hpp"
#include "promptinv/optimizers/pez.hpp"
#include "promptinv/optimizers/random_search.hpp"
