#pragma once

#include "monofusion/mvs/cascade.hpp"
#include "monofusion/mvs/depth_range.hpp"
#include "monofusion/mvs/plane_sweep.hpp"
#include "monofusion/mvs/types.hpp"
