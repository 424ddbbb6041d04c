#pragma once

#include "monofusion/synth/noise.hpp"
#include "monofusion/synth/render.hpp"
#include "monofusion/synth/scene.hpp"
