#pragma once

#include "maris/channel.hpp"
#include "maris/harness/config.hpp"
#include "maris/harness/diagnostics.hpp"
#include "maris/harness/init.hpp"
#include "maris/harness/scenario.hpp"
#include "maris/harness/schemes.hpp"
#include "maris/harness/sweep.hpp"
#include "maris/manifold.hpp"
#include "maris/objective.hpp"
#include "maris/solver.hpp"
