#pragma once

#include "coarsemp/version.hpp"
#include "coarsemp/graph.hpp"
#include "coarsemp/rng.hpp"
#include "coarsemp/seminorm.hpp"
#include "coarsemp/coarsening.hpp"
#include "coarsemp/loukas.hpp"
#include "coarsemp/operators.hpp"
#include "coarsemp/gnn.hpp"
#include "coarsemp/datasets.hpp"
#include "coarsemp/serialize.hpp"
#include "coarsemp/experiment.hpp"
