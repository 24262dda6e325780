#pragma once

#include "homsim/afterpulse.hpp"
#include "homsim/config.hpp"
#include "homsim/errors.hpp"
#include "homsim/math.hpp"
#include "homsim/model.hpp"
#include "homsim/montecarlo.hpp"
#include "homsim/random.hpp"
#include "homsim/sweep.hpp"
#include "homsim/timetags.hpp"
