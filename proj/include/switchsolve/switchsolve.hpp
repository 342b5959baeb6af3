#pragma once

#include "switchsolve/error.hpp"
#include "switchsolve/model.hpp"
#include "switchsolve/discretization.hpp"
#include "switchsolve/banded.hpp"
#include "switchsolve/qvi_solver.hpp"
#include "switchsolve/regions.hpp"
#include "switchsolve/mdp_oracle.hpp"
#include "switchsolve/parallel.hpp"
#include "switchsolve/simulator.hpp"
