#pragma once

#include "common.hpp"
#include "rng.hpp"
#include "graph.hpp"
#include "dataset_io.hpp"
#include "generators.hpp"
#include "autodiff.hpp"
#include "adam.hpp"
#include "models.hpp"
#include "matching.hpp"
#include "synth_init.hpp"
#include "condense.hpp"
#include "stats.hpp"
#include "spectral.hpp"
#include "freq_grad.hpp"
#include "diagnostics.hpp"
#include "eval.hpp"
#include "reports.hpp"
