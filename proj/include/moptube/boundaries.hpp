/* Copyright 2026 The moptube Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MOPTUBE_BOUNDARIES_HPP_
#define MOPTUBE_BOUNDARIES_HPP_

#include "moptube/common.hpp"
#include "moptube/videoio.hpp"

namespace moptube {

// Per-pixel boundary strength in [0,1].
using BoundaryMap = Grid<double>;

struct BoundaryParams {
  double sigma = 2.0;  // squashing scale: s(g) = 1 - exp(-g / sigma)
  bool thin = false;   // non-maximum suppression along the gradient direction
};

// Scharr gradient magnitude of a scalar field (normalized so a unit ramp
// has gradient 1), squashed into [0,1]. Borders replicate the edge value.
BoundaryMap gradientBoundaries(const Grid<double>& field, const BoundaryParams& params);

// Boundaries of the flow magnitude sqrt(u^2 + v^2). Direction is ignored.
BoundaryMap motionBoundaries(const FlowField& flow, const BoundaryParams& params);

// Boundaries of frame intensity (luma for RGB).
BoundaryMap imageBoundaries(const Frame& frame, const BoundaryParams& params);

}  // namespace moptube

#endif  // MOPTUBE_BOUNDARIES_HPP_
