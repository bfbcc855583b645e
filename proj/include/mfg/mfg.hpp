#pragma once

#include "mfg/common.hpp"
#include "mfg/config.hpp"
#include "mfg/dgm/ergodic.hpp"
#include "mfg/dgm/finite.hpp"
#include "mfg/fdm/solver.hpp"
#include "mfg/harness/fields.hpp"
#include "mfg/lq/analytic.hpp"
#include "mfg/models.hpp"
#include "mfg/nn/checkpoint.hpp"
#include "mfg/quadrature.hpp"
#include "mfg/sampler.hpp"
