#pragma once

// Umbrella header for the AI-augmented conjoint estimation library.

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/estimators.hpp"
#include "aae/gmodel.hpp"
#include "aae/inference.hpp"
#include "aae/io.hpp"
#include "aae/metrics.hpp"
#include "aae/rng.hpp"
#include "aae/simlab.hpp"
#include "aae/worlds.hpp"
