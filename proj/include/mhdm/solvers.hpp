#pragma once

#include "mhdm/solvers/dz.hpp"
#include "mhdm/solvers/initialize.hpp"
#include "mhdm/solvers/multiplicative.hpp"
#include "mhdm/solvers/params.hpp"
#include "mhdm/solvers/so.hpp"
