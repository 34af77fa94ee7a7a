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

#ifndef MOPTUBE_TUBES_HPP_
#define MOPTUBE_TUBES_HPP_

#include <span>
#include <vector>

#include "moptube/boundaries.hpp"
#include "moptube/randomwalk.hpp"

namespace moptube {

// Labeled partition of one frame; labels are dense 0..count-1.
struct Partition {
  Grid<int> labels;
  int count = 0;
};

struct SuperpixelParams {
  double thetaSp = 0.3;  // pixels at or below this strength merge freely
  int minArea = 16;
};

// Watershed-style flooding in ascending strength order. A pixel at or below
// thetaSp unions every adjacent region it touches; a stronger pixel joins
// its weakest labeled neighbour. A pixel with no labeled neighbour seeds a
// new region. Regions under minArea are merged into the neighbour sharing
// the longest border.
Partition superpixels(const BoundaryMap& b, const SuperpixelParams& params);

struct Supervoxel {
  int id = 0;
  int first = 0;
  std::vector<int> regions;  // per-frame region label, frames first..last()

  int last() const { return first + static_cast<int>(regions.size()) - 1; }
};

struct SupervoxelSet {
  std::vector<Supervoxel> supervoxels;
  std::vector<std::vector<int>> owner;  // owner[t][region] = supervoxel id
  std::vector<Partition> partitions;

  int supervoxelAt(int t, int x, int y) const {
    return owner[t][partitions[t].labels(x, y)];
  }
};

// Links each region to the region of the next frame that receives the
// largest share of its nearest-pixel forward warp; a link needs a share of
// at least thetaLink and must be the mutual best.
SupervoxelSet buildSupervoxels(std::vector<Partition> partitions, std::span<const FlowField> flows,
                               double thetaLink = 0.5);

struct Projection {
  Tube tube;
  std::vector<double> weights;      // per supervoxel
  std::vector<int> selected;        // supervoxels with weight >= thresh, ascending
};

// Supervoxel weight = cluster points inside / all trajectory points inside
// (rounded positions, 0 without points). The tube keeps supervoxels whose
// weight reaches thresh, trimmed to its largest contiguous non-empty span.
Projection projectCluster(const TrajectoryCluster& c, const TrajectorySet& ts, const SupervoxelSet& svs,
                          double thresh = 0.5);

// Per-frame 16-bit label PGMs plus supervoxels.json {frameCount, supervoxels:[{id, first, regions}]}.
void saveSupervoxels(const SupervoxelSet& svs, const fs::path& dir);
SupervoxelSet loadSupervoxels(const fs::path& dir);

}  // namespace moptube

#endif  // MOPTUBE_TUBES_HPP_
