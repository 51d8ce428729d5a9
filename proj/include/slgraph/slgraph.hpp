#pragma once

#include "slgraph/characteristics.hpp"
#include "slgraph/classical.hpp"
#include "slgraph/graph.hpp"
#include "slgraph/grid.hpp"
#include "slgraph/io.hpp"
#include "slgraph/model.hpp"
#include "slgraph/nnad.hpp"
#include "slgraph/pipeline.hpp"
#include "slgraph/poisson.hpp"
#include "slgraph/problems.hpp"
#include "slgraph/rng.hpp"
#include "slgraph/tensor.hpp"
#include "slgraph/threading.hpp"
#include "slgraph/train.hpp"
#include "slgraph/vp.hpp"
