#pragma once

#include "graph2ts/dataset.hpp"
#include "graph2ts/grad_check.hpp"
#include "graph2ts/io.hpp"
#include "graph2ts/metrics.hpp"
#include "graph2ts/model.hpp"
#include "graph2ts/params.hpp"
#include "graph2ts/quantile_graph.hpp"
#include "graph2ts/tape.hpp"
#include "graph2ts/tensor.hpp"
#include "graph2ts/train.hpp"
