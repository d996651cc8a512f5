#pragma once

#include "resplan/bits.hpp"
#include "resplan/error.hpp"
#include "resplan/exact.hpp"
#include "resplan/factored_lp.hpp"
#include "resplan/fmdp.hpp"
#include "resplan/lp.hpp"
#include "resplan/network.hpp"
#include "resplan/policy.hpp"
#include "resplan/rng.hpp"
#include "resplan/scenario.hpp"
#include "resplan/sim.hpp"
