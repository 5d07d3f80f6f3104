#pragma once

#include "matteforge/config.hpp"
#include "matteforge/error.hpp"
#include "matteforge/filters.hpp"
#include "matteforge/guidance.hpp"
#include "matteforge/harness.hpp"
#include "matteforge/losses.hpp"
#include "matteforge/metrics.hpp"
#include "matteforge/parallel.hpp"
#include "matteforge/png_io.hpp"
#include "matteforge/raster.hpp"
#include "matteforge/rng.hpp"
#include "matteforge/sfm.hpp"
#include "matteforge/trimap.hpp"
