#pragma once

#include "ratekit/allocation.hpp"
#include "ratekit/data_model.hpp"
#include "ratekit/errors.hpp"
#include "ratekit/evaluation.hpp"
#include "ratekit/expectile.hpp"
#include "ratekit/glm.hpp"
#include "ratekit/normal.hpp"
#include "ratekit/principles.hpp"
#include "ratekit/quantile.hpp"
#include "ratekit/rng.hpp"
#include "ratekit/simulator.hpp"
