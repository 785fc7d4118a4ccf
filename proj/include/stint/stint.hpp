#pragma once

// Umbrella header: spatio-temporal interaction tests for point patterns.

#include "classical.hpp"
#include "common.hpp"
#include "data.hpp"
#include "diagnostics.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "model.hpp"
#include "pairs.hpp"
#include "permute.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "simulate.hpp"
