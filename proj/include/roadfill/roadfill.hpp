#pragma once

#include "roadfill/common.hpp"
#include "roadfill/complete.hpp"
#include "roadfill/eval.hpp"
#include "roadfill/features.hpp"
#include "roadfill/image.hpp"
#include "roadfill/integrate.hpp"
#include "roadfill/mask.hpp"
#include "roadfill/mesh.hpp"
#include "roadfill/mesh_io.hpp"
#include "roadfill/pipeline.hpp"
#include "roadfill/png_io.hpp"
#include "roadfill/regularity.hpp"
#include "roadfill/remap.hpp"
#include "roadfill/rng.hpp"
