#pragma once

#include "tabgnn/benchmark.hpp"
#include "tabgnn/dataset.hpp"
#include "tabgnn/error.hpp"
#include "tabgnn/evaluation.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/models.hpp"
#include "tabgnn/parallel.hpp"
#include "tabgnn/random.hpp"
#include "tabgnn/tensor.hpp"
#include "tabgnn/training.hpp"
