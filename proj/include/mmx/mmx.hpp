#pragma once

#include "mmx/core.hpp"
#include "mmx/manifold.hpp"
#include "mmx/prox.hpp"
#include "mmx/problem.hpp"
#include "mmx/penalty.hpp"
#include "mmx/metrics.hpp"
#include "mmx/solver.hpp"
#include "mmx/trace_io.hpp"
#include "mmx/experiment.hpp"
#include "mmx/checks.hpp"
