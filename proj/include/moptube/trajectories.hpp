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

#ifndef MOPTUBE_TRAJECTORIES_HPP_
#define MOPTUBE_TRAJECTORIES_HPP_

#include <span>
#include <vector>

#include "moptube/videoio.hpp"

namespace moptube {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Trajectory {
  int id = 0;
  int startFrame = 0;
  std::vector<Point2> points;  // one per frame of life

  int endFrame() const { return startFrame + static_cast<int>(points.size()) - 1; }
  bool aliveAt(int t) const { return t >= startFrame && t <= endFrame(); }
  const Point2& at(int t) const { return points[static_cast<std::size_t>(t - startFrame)]; }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectorySet {
  std::vector<Trajectory> trajectories;  // ids are dense 0..n-1, in order
  int frameCount = 0;
  int width = 0;
  int height = 0;

  std::size_t n() const { return trajectories.size(); }
  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

struct TrackParams {
  int stride = 4;         // coverage grid cell size
  double thetaA = 0.5;    // absolute forward-backward tolerance (px^2)
  double thetaR = 0.01;   // relative tolerance
};

// Bilinear flow sample, coordinates clamped to the grid.
Point2 sampleFlow(const FlowField& flow, double x, double y);

// Links forward flows into trajectories. A point p at frame t moves to
// p' = p + F_t(p) and survives iff p' is in bounds and
//   |F_t(p) + B_t(p')|^2 <= thetaA + thetaR (|F_t(p)|^2 + |B_t(p')|^2).
// Grid cells without a live trajectory are re-seeded every frame; when two
// trajectories land in one cell the lower id survives.
TrajectorySet linkTrajectories(std::span<const FlowField> forward,
                               std::span<const FlowField> backward, const TrackParams& params);

// JSON lines {id, startFrame, points:[[x,y],...]}, preceded by a header
// record {frameCount, width, height}.
void saveTrajectories(const TrajectorySet& ts, const fs::path& path);
TrajectorySet loadTrajectories(const fs::path& path);

}  // namespace moptube

#endif  // MOPTUBE_TRAJECTORIES_HPP_
