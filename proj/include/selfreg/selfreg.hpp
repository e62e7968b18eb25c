#pragma once
// Umbrella header.

#include "selfreg/affect.hpp"
#include "selfreg/arbitration.hpp"
#include "selfreg/errors.hpp"
#include "selfreg/feedback_loop.hpp"
#include "selfreg/goal_model.hpp"
#include "selfreg/harness.hpp"
#include "selfreg/regulation_dynamics.hpp"
#include "selfreg/world_sim.hpp"
