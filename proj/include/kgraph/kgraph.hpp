#pragma once

#include "kgraph/analysis.hpp"
#include "kgraph/config.hpp"
#include "kgraph/distance.hpp"
#include "kgraph/domain.hpp"
#include "kgraph/errors.hpp"
#include "kgraph/expression.hpp"
#include "kgraph/geometry.hpp"
#include "kgraph/geometry_file.hpp"
#include "kgraph/grid.hpp"
#include "kgraph/operator.hpp"
#include "kgraph/report.hpp"
#include "kgraph/solver.hpp"
