#pragma once

#include "wpeloc/diarizer.hpp"
#include "wpeloc/metrics.hpp"
#include "wpeloc/pairscore.hpp"
#include "wpeloc/roomsim.hpp"
#include "wpeloc/spectral.hpp"
#include "wpeloc/timeline.hpp"
#include "wpeloc/wav.hpp"
#include "wpeloc/wpe.hpp"
