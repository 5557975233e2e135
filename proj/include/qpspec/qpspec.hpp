#pragma once

#include "box_partition.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "lyapunov.hpp"
#include "parallel.hpp"
#include "perturb.hpp"
#include "pieces.hpp"
#include "propagation.hpp"
#include "quadrature.hpp"
#include "sampling.hpp"
#include "torus_flow.hpp"
#include "zero_measure.hpp"
