#pragma once

#include "monofusion/tracking/depth_buffer.hpp"
#include "monofusion/tracking/tracker.hpp"
