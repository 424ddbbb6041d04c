#pragma once

#include "monofusion/eval.hpp"
#include "monofusion/geometry.hpp"
#include "monofusion/mvs.hpp"
#include "monofusion/pipeline.hpp"
#include "monofusion/synth.hpp"
#include "monofusion/tracking.hpp"
#include "monofusion/tsdf.hpp"
