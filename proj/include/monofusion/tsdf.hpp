#pragma once

#include "monofusion/tsdf/integrate.hpp"
#include "monofusion/tsdf/mesh.hpp"
#include "monofusion/tsdf/raycast.hpp"
#include "monofusion/tsdf/snapshot.hpp"
#include "monofusion/tsdf/volume.hpp"
