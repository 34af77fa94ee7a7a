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

#ifndef MOPTUBE_OBJECTNESS_HPP_
#define MOPTUBE_OBJECTNESS_HPP_

#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "moptube/metrics.hpp"
#include "moptube/mops.hpp"
#include "moptube/videoio.hpp"

namespace moptube {

// Flow-magnitude statistics for O(1) box means.
class FlowMagnitudeStats {
 public:
  explicit FlowMagnitudeStats(const FlowField& flow);
  double boxMean(const Box& box) const;
  double boxSum(const Box& box) const;
  // Nearest-rank 95th percentile, falling back to the maximum when the
  // percentile is zero.
  double normalizer() const { return normalizer_; }
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_ = 0, height_ = 0;
  std::vector<double> integral_;  // (w+1) x (h+1)
  double normalizer_ = 0.0;
};

// Interior minus surround mean flow magnitude, each normalized and clamped
// to [0,1]. The surround is the box dilated by max(side)/2, clipped to the
// frame, minus the box; an empty surround counts as 0.
double centerSurround(const FlowMagnitudeStats& stats, const Box& box);
double centerSurround(const FlowField& flow, const Box& box);

// Per-box scorer; frame f is scored against the flow leaving f (the last
// frame uses the flow entering it).
class BoxScorer {
 public:
  virtual ~BoxScorer() = default;
  virtual double score(int frame, const Box& box) const = 0;
};

class CenterSurroundScorer : public BoxScorer {
 public:
  explicit CenterSurroundScorer(std::span<const FlowField> flows);
  double score(int frame, const Box& box) const override;
  int frameCount() const { return static_cast<int>(stats_.size()) + 1; }

 private:
  std::vector<FlowMagnitudeStats> stats_;
};

// Precomputed scores, e.g. from a learned detector: JSON array of
// {frame, box:[x0,y0,x1,y1], score}.
class ExternalScorer : public BoxScorer {
 public:
  static ExternalScorer load(const fs::path& path);
  void add(int frame, const Box& box, double score);
  double score(int frame, const Box& box) const override;

 private:
  std::map<std::tuple<int, int, int, int, int>, double> scores_;
};

enum class Aggregation { sum, mean };

// Sum (or mean) of per-frame box scores over the span; stored in t.score.
double scoreTube(Tube& t, const BoxScorer& scorer, Aggregation agg = Aggregation::sum);

struct RankedItem {
  int id = 0;
  double score = 0.0;
};

struct RankedList {
  std::vector<RankedItem> items;
  bool diversified = false;
};

struct DiversifyParams {
  bool enabled = false;
  double gamma = 1.0;
};

// Sort descending by score; ties by earlier span start, larger volume, then
// id. With diversification each step takes the item maximizing
// score - gamma * maxIoU(selected) * |score|, and the item carries that
// adjusted score.
RankedList rankTubes(std::span<const Tube> pool, const DiversifyParams& diversify);

// Scores every tube, then ranks.
RankedList rank(std::vector<Tube>& pool, const BoxScorer& scorer, const DiversifyParams& diversify,
                Aggregation agg = Aggregation::sum);

// Keeps the keepTop best-scoring proposals of each frame (stable on ties).
std::vector<Proposal> filterProposals(const std::vector<Proposal>& proposals, const BoxScorer& scorer,
                                      int keepTop, std::vector<double>* scores = nullptr);

}  // namespace moptube

#endif  // MOPTUBE_OBJECTNESS_HPP_
