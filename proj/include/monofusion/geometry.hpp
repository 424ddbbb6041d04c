#pragma once

#include "monofusion/geometry/alignment.hpp"
#include "monofusion/geometry/camera.hpp"
#include "monofusion/geometry/pose.hpp"
#include "monofusion/geometry/trajectory_io.hpp"
