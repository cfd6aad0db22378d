#pragma once

#include "rfr/errors.hpp"
#include "rfr/hedging.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/monte_carlo.hpp"
#include "rfr/numerics.hpp"
#include "rfr/pricing.hpp"
#include "rfr/riccati.hpp"
#include "rfr/rng.hpp"
#include "rfr/schedule.hpp"
#include "rfr/time_function.hpp"
