#pragma once

#include "hillclimb/ball_search.hpp"
#include "hillclimb/density.hpp"
#include "hillclimb/error.hpp"
#include "hillclimb/flow.hpp"
#include "hillclimb/gaussian_mixture.hpp"
#include "hillclimb/kde.hpp"
#include "hillclimb/kernel.hpp"
#include "hillclimb/log.hpp"
#include "hillclimb/medoid.hpp"
#include "hillclimb/parallel.hpp"
#include "hillclimb/point_io.hpp"
#include "hillclimb/shift.hpp"
#include "hillclimb/spatial_index.hpp"
#include "hillclimb/trajectory.hpp"
#include "hillclimb/types.hpp"
#include "hillclimb/experiment.hpp"
