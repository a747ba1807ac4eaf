#pragma once

// Umbrella header for the fair attribute-completion library.

#include "fairac/adam.hpp"
#include "fairac/config.hpp"
#include "fairac/dataset.hpp"
#include "fairac/deepwalk.hpp"
#include "fairac/experiment.hpp"
#include "fairac/gcn.hpp"
#include "fairac/graph.hpp"
#include "fairac/io.hpp"
#include "fairac/metrics.hpp"
#include "fairac/model.hpp"
#include "fairac/rng.hpp"
#include "fairac/tensor.hpp"
#include "fairac/trainer.hpp"
