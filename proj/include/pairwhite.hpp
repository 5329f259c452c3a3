#pragma once

#include "pairwhite/cv.hpp"
#include "pairwhite/error.hpp"
#include "pairwhite/folds.hpp"
#include "pairwhite/logreg.hpp"
#include "pairwhite/manifest.hpp"
#include "pairwhite/metrics.hpp"
#include "pairwhite/preprocess.hpp"
#include "pairwhite/spectral.hpp"
#include "pairwhite/stats.hpp"
#include "pairwhite/synth.hpp"
#include "pairwhite/table.hpp"
#include "pairwhite/whitener.hpp"
