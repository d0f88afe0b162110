#pragma once

#include "stocs/base_sampler.hpp"
#include "stocs/bench.hpp"
#include "stocs/config.hpp"
#include "stocs/congruence.hpp"
#include "stocs/descriptor.hpp"
#include "stocs/error.hpp"
#include "stocs/geometry.hpp"
#include "stocs/io.hpp"
#include "stocs/metrics.hpp"
#include "stocs/ppf.hpp"
#include "stocs/random.hpp"
#include "stocs/registration.hpp"
#include "stocs/soft_segment.hpp"
#include "stocs/spatial_index.hpp"
#include "stocs/synth.hpp"
