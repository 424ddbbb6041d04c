#pragma once

#include "monofusion/eval/depth_metrics.hpp"
#include "monofusion/eval/mesh_metrics.hpp"
#include "monofusion/eval/report.hpp"
#include "monofusion/eval/trajectory_error.hpp"
