#pragma once

#include "mvavg/error.hpp"
#include "mvavg/measure.hpp"
#include "mvavg/spatial.hpp"
#include "mvavg/rng.hpp"
#include "mvavg/parallel.hpp"
#include "mvavg/model.hpp"
#include "mvavg/models.hpp"
#include "mvavg/probe.hpp"
#include "mvavg/integrate.hpp"
#include "mvavg/averaging.hpp"
#include "mvavg/study.hpp"
