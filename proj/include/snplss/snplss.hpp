#pragma once

#include "snplss/boost.hpp"
#include "snplss/calibration.hpp"
#include "snplss/common.hpp"
#include "snplss/genotype.hpp"
#include "snplss/gxe.hpp"
#include "snplss/metrics.hpp"
#include "snplss/model.hpp"
#include "snplss/rng.hpp"
#include "snplss/sim.hpp"
#include "snplss/stats.hpp"
