#pragma once

#include "core.hpp"
#include "graph_model.hpp"
#include "linear_solve.hpp"
#include "waiting_time.hpp"
#include "fpp_analysis.hpp"
#include "ergodic_tpt.hpp"
#include "trajectory_data.hpp"
#include "monte_carlo.hpp"
#include "io.hpp"
