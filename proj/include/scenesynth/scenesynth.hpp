#pragma once

// Umbrella header.
#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/bvh.hpp"
#include "scenesynth/common.hpp"
#include "scenesynth/dataset_io.hpp"
#include "scenesynth/geometry_features.hpp"
#include "scenesynth/http_backends.hpp"
#include "scenesynth/image_io.hpp"
#include "scenesynth/layout_solver.hpp"
#include "scenesynth/mesh.hpp"
#include "scenesynth/metrics.hpp"
#include "scenesynth/object_selection.hpp"
#include "scenesynth/pipeline.hpp"
#include "scenesynth/relations.hpp"
#include "scenesynth/scene_builder.hpp"
#include "scenesynth/virtual_scanner.hpp"
