#pragma once

#include "monofusion/pipeline/config.hpp"
#include "monofusion/pipeline/dataset.hpp"
#include "monofusion/pipeline/keyframes.hpp"
#include "monofusion/pipeline/runner.hpp"
#include "monofusion/pipeline/spsc_queue.hpp"
