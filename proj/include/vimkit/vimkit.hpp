#pragma once

// Umbrella header for the whole library.

#include "vimkit/coarsened.hpp"
#include "vimkit/csv.hpp"
#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"
#include "vimkit/estimators.hpp"
#include "vimkit/folds.hpp"
#include "vimkit/learners.hpp"
#include "vimkit/measures.hpp"
#include "vimkit/normal.hpp"
#include "vimkit/parallel.hpp"
#include "vimkit/report.hpp"
#include "vimkit/rng.hpp"
#include "vimkit/simulation.hpp"
