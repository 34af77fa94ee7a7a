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

#include "moptube/boundaries.hpp"

#include <cmath>

namespace moptube {

BoundaryMap gradientBoundaries(const Grid<double>& field, const BoundaryParams& params) {
  if (!(params.sigma > 0.0)) fail(ErrorCode::argument, "boundary sigma must be positive");
  const int w = field.width(), h = field.height();
  auto at = [&](int x, int y) {
    return field(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  Grid<double> gx(w, h, 0.0), gy(w, h, 0.0), mag(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Scharr weights 3-10-3; /32 makes a unit ramp read as 1.
      const double dx = 3.0 * (at(x + 1, y - 1) - at(x - 1, y - 1)) +
                        10.0 * (at(x + 1, y) - at(x - 1, y)) +
                        3.0 * (at(x + 1, y + 1) - at(x - 1, y + 1));
      const double dy = 3.0 * (at(x - 1, y + 1) - at(x - 1, y - 1)) +
                        10.0 * (at(x, y + 1) - at(x, y - 1)) +
                        3.0 * (at(x + 1, y + 1) - at(x + 1, y - 1));
      gx(x, y) = dx / 32.0;
      gy(x, y) = dy / 32.0;
      mag(x, y) = std::hypot(gx(x, y), gy(x, y));
    }
  }

  BoundaryMap out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = mag(x, y);
      if (!(g > 0.0)) continue;
      if (params.thin) {
        // Quantize the gradient direction to one of four neighbour axes.
        const double angle = std::atan2(gy(x, y), gx(x, y));
        double a = angle < 0 ? angle + M_PI : angle;
        int ox = 1, oy = 0;
        if (a >= M_PI / 8 && a < 3 * M_PI / 8) {
          ox = 1; oy = 1;
        } else if (a >= 3 * M_PI / 8 && a < 5 * M_PI / 8) {
          ox = 0; oy = 1;
        } else if (a >= 5 * M_PI / 8 && a < 7 * M_PI / 8) {
          ox = -1; oy = 1;
        }
        auto m = [&](int xx, int yy) {
          return mag(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1));
        };
        if (g < m(x + ox, y + oy) || g < m(x - ox, y - oy)) continue;
      }
      out(x, y) = 1.0 - std::exp(-g / params.sigma);
    }
  }
  return out;
}

BoundaryMap motionBoundaries(const FlowField& flow, const BoundaryParams& params) {
  Grid<double> m(flow.width, flow.height, 0.0);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const double v = flow.magnitude(x, y);
      if (!std::isfinite(v)) fail(ErrorCode::data, "motionBoundaries: non-finite flow");
      m(x, y) = v;
    }
  return gradientBoundaries(m, params);
}

BoundaryMap imageBoundaries(const Frame& frame, const BoundaryParams& params) {
  Grid<double> m(frame.width, frame.height, 0.0);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) m(x, y) = frame.gray(x, y);
  return gradientBoundaries(m, params);
}

}  // namespace moptube
