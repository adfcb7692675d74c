#pragma once

#include "rtwin/autograd.hpp"
#include "rtwin/composite.hpp"
#include "rtwin/error.hpp"
#include "rtwin/evaluate.hpp"
#include "rtwin/model.hpp"
#include "rtwin/normalize.hpp"
#include "rtwin/raster_io.hpp"
#include "rtwin/rng.hpp"
#include "rtwin/stitch.hpp"
#include "rtwin/tiling.hpp"
#include "rtwin/training.hpp"
