#pragma once

#include "boxseg/ablation.hpp"
#include "boxseg/backends.hpp"
#include "boxseg/dataset.hpp"
#include "boxseg/error.hpp"
#include "boxseg/evaluation.hpp"
#include "boxseg/geometry.hpp"
#include "boxseg/image_io.hpp"
#include "boxseg/mask.hpp"
#include "boxseg/pipeline.hpp"
#include "boxseg/process.hpp"
#include "boxseg/protocol.hpp"
#include "boxseg/rng.hpp"
