#pragma once

#include "sglmm/common.hpp"
#include "sglmm/evaluate.hpp"
#include "sglmm/io.hpp"
#include "sglmm/kinship.hpp"
#include "sglmm/mixed_model.hpp"
#include "sglmm/pipeline.hpp"
#include "sglmm/simulate.hpp"
#include "sglmm/solver.hpp"
#include "sglmm/trait_graph.hpp"
#include "sglmm/tuning.hpp"
