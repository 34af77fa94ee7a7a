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

#ifndef MOPTUBE_METRICS_HPP_
#define MOPTUBE_METRICS_HPP_

#include <span>
#include <vector>

#include "moptube/mops.hpp"
#include "moptube/videoio.hpp"

namespace moptube {

// Voxel IoU over the union of both spans; frames outside a span count as
// empty. Zero when both tubes are empty.
double tubeIoU(const Tube& a, const Tube& b);

struct GtMatch {
  int gt = 0;
  double bestIoU = 0.0;
  int proposal = -1;   // achieving pool index, -1 when nothing overlaps
  int frame = -1;      // achieving frame (per-frame evaluation only)
  long long area = 0;  // voxels (tubes) or pixels (frame segments)
};

struct Aggregates {
  double averageBestOverlap = 0.0;
  double coverage = 0.0;
  double det50 = 0.0;
  double det70 = 0.0;
};

// Anytime-best versions exist for average best overlap and detection rates.
struct AnytimeAggregates {
  double averageBestOverlap = 0.0;
  double det50 = 0.0;
  double det70 = 0.0;
};

struct CurvePoint {
  int poolSize = 0;
  Aggregates at;  // at.averageBestOverlap is the curve's mean best IoU
};

struct EvalReport {
  std::vector<GtMatch> perGt;
  Aggregates aggregates;
  bool hasAnytime = false;
  AnytimeAggregates anytime;
  std::vector<CurvePoint> curve;
};

Aggregates aggregate(std::span<const GtMatch> matches);

// 1, 2, 4, ..., 1024.
std::vector<int> defaultPoolSizes();

// `ranked` is the pool in rank order. For each size s the first min(s, pool)
// tubes are matched against every ground-truth tube; perGt and aggregates
// describe the full pool.
EvalReport evaluate(std::span<const Tube> ranked, std::span<const Tube> gt, std::span<const int> atSizes);

// Per-frame segment evaluation. aggregates treat every in-span ground-truth
// slice as its own 2-D segment; the anytime versions (and perGt) take, per
// ground-truth tube, the best 2-D IoU of any proposal over its lifespan.
EvalReport evaluatePerFrame(std::span<const Proposal> proposals, std::span<const Tube> gt);

void saveReport(const EvalReport& report, const fs::path& jsonPath);
// Columns: pool_size,mean_best_iou,coverage,det50,det70
void saveCurveCsv(const EvalReport& report, const fs::path& csvPath);

}  // namespace moptube

#endif  // MOPTUBE_METRICS_HPP_
