#pragma once

#include "mhdm/degrade.hpp"
#include "mhdm/error.hpp"
#include "mhdm/functionals.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/io.hpp"
#include "mhdm/metrics.hpp"
#include "mhdm/multiscale.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers.hpp"
#include "mhdm/tvprox.hpp"
