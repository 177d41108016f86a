#pragma once

#include "checkpoint.hpp"
#include "config.hpp"
#include "core_env.hpp"
#include "dqn.hpp"
#include "errors.hpp"
#include "market_agents.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "profiles.hpp"
#include "rng.hpp"
#include "simulation.hpp"
