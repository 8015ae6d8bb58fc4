// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ee2d/adapter.hpp"
#include "ee2d/convert.hpp"
#include "ee2d/dataset_io.hpp"
#include "ee2d/engine.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/metrics.hpp"
#include "ee2d/parallel.hpp"
#include "ee2d/seed.hpp"
#include "ee2d/synth.hpp"
#include "ee2d/textseg.hpp"
#include "ee2d/training.hpp"
#include "ee2d/tuner.hpp"
