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

#include "moptube/objectness.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

FlowMagnitudeStats::FlowMagnitudeStats(const FlowField& flow)
    : width_(flow.width), height_(flow.height),
      integral_(static_cast<std::size_t>(flow.width + 1) * (flow.height + 1), 0.0) {
  std::vector<double> mags;
  mags.reserve(static_cast<std::size_t>(width_) * height_);
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  for (int y = 0; y < height_; ++y) {
    double row = 0.0;
    for (int x = 0; x < width_; ++x) {
      const double m = flow.magnitude(x, y);
      mags.push_back(m);
      row += m;
      integral_[(y + 1) * stride + x + 1] = integral_[y * stride + x + 1] + row;
    }
  }
  if (!mags.empty()) {
    std::sort(mags.begin(), mags.end());
    const auto rankIndex = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(mags.size()))) - 1;
    normalizer_ = mags[std::min(rankIndex, mags.size() - 1)];
    if (normalizer_ <= 0.0) normalizer_ = mags.back();
  }
}

double FlowMagnitudeStats::boxSum(const Box& b) const {
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  auto at = [&](int x, int y) { return integral_[static_cast<std::size_t>(y) * stride + x]; };
  return at(b.x1 + 1, b.y1 + 1) - at(b.x0, b.y1 + 1) - at(b.x1 + 1, b.y0) + at(b.x0, b.y0);
}

double FlowMagnitudeStats::boxMean(const Box& b) const {
  return boxSum(b) / static_cast<double>(b.area());
}

double centerSurround(const FlowMagnitudeStats& stats, const Box& box) {
  if (box.empty() || box.area() < 1) fail(ErrorCode::argument, "centerSurround: zero-area box");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= stats.width() || box.y1 >= stats.height())
    fail(ErrorCode::argument, "centerSurround: box outside the frame");
  const double norm = stats.normalizer();
  if (!(norm > 0.0)) return 0.0;
  const double inner = std::clamp(stats.boxMean(box) / norm, 0.0, 1.0);
  const int d = std::max(box.width(), box.height()) / 2;
  const Box outer{std::max(box.x0 - d, 0), std::max(box.y0 - d, 0), std::min(box.x1 + d, stats.width() - 1),
                  std::min(box.y1 + d, stats.height() - 1)};
  const long long ringArea = outer.area() - box.area();
  double ring = 0.0;
  if (ringArea > 0) {
    const double sum = std::max(stats.boxSum(outer) - stats.boxSum(box), 0.0);
    ring = std::clamp(sum / static_cast<double>(ringArea) / norm, 0.0, 1.0);
  }
  return inner - ring;
}

double centerSurround(const FlowField& flow, const Box& box) {
  return centerSurround(FlowMagnitudeStats(flow), box);
}

CenterSurroundScorer::CenterSurroundScorer(std::span<const FlowField> flows) {
  if (flows.empty()) fail(ErrorCode::argument, "CenterSurroundScorer: no flow fields");
  stats_.reserve(flows.size());
  for (const auto& f : flows) stats_.emplace_back(f);
}

double CenterSurroundScorer::score(int frame, const Box& box) const {
  if (frame < 0 || frame >= frameCount()) fail(ErrorCode::argument, "CenterSurroundScorer: frame out of range");
  return centerSurround(stats_[std::min<std::size_t>(static_cast<std::size_t>(frame), stats_.size() - 1)], box);
}

ExternalScorer ExternalScorer::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open: " + path.string());
  ExternalScorer s;
  try {
    const json j = json::parse(in);
    for (const auto& e : j) {
      const auto b = e.at("box").get<std::vector<int>>();
      if (b.size() != 4) fail(ErrorCode::format, "external score box needs 4 values: " + path.string());
      s.add(e.at("frame").get<int>(), {b[0], b[1], b[2], b[3]}, e.at("score").get<double>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad external score file " + path.string() + ": " + e.what());
  }
  return s;
}

void ExternalScorer::add(int frame, const Box& box, double score) {
  scores_[{frame, box.x0, box.y0, box.x1, box.y1}] = score;
}

double ExternalScorer::score(int frame, const Box& box) const {
  const auto it = scores_.find({frame, box.x0, box.y0, box.x1, box.y1});
  if (it == scores_.end())
    fail(ErrorCode::data, "external score missing for frame " + std::to_string(frame) + " box [" +
                              std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                              std::to_string(box.x1) + "," + std::to_string(box.y1) + "]");
  return it->second;
}

double scoreTube(Tube& t, const BoxScorer& scorer, Aggregation agg) {
  if (t.boxes.size() != t.masks.size()) t.refreshBoxes();
  double s = 0.0;
  for (int k = 0; k < t.length(); ++k) s += scorer.score(t.first + k, t.boxes[k]);
  if (agg == Aggregation::mean && t.length() > 0) s /= t.length();
  t.score = s;
  return s;
}

RankedList rankTubes(std::span<const Tube> pool, const DiversifyParams& diversify) {
  const std::size_t n = pool.size();
  std::vector<long long> volume(n);
  for (std::size_t i = 0; i < n; ++i) volume[i] = pool[i].volume();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pool[a].score != pool[b].score) return pool[a].score > pool[b].score;
    if (pool[a].first != pool[b].first) return pool[a].first < pool[b].first;
    if (volume[a] != volume[b]) return volume[a] > volume[b];
    return a < b;
  });

  RankedList out;
  out.diversified = diversify.enabled;
  if (!diversify.enabled) {
    for (int i : order) out.items.push_back({i, pool[i].score});
    return out;
  }
  // Greedy re-ranking; penalties only grow, so the emitted adjusted scores
  // are non-increasing.
  std::vector<double> maxIoU(n, 0.0);
  std::vector<char> taken(n, 0);
  for (std::size_t step = 0; step < n; ++step) {
    int pick = -1;
    double best = 0.0;
    for (int i : order) {
      if (taken[i]) continue;
      const double adjusted = pool[i].score - diversify.gamma * maxIoU[i] * std::abs(pool[i].score);
      if (pick < 0 || adjusted > best) {
        pick = i;
        best = adjusted;
      }
    }
    taken[pick] = 1;
    out.items.push_back({pick, best});
    if (diversify.gamma != 0.0)
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) maxIoU[i] = std::max(maxIoU[i], tubeIoU(pool[i], pool[pick]));
  }
  return out;
}

RankedList rank(std::vector<Tube>& pool, const BoxScorer& scorer, const DiversifyParams& diversify,
                Aggregation agg) {
  if (pool.empty()) fail(ErrorCode::argument, "rank: empty pool");
  for (auto& t : pool) scoreTube(t, scorer, agg);
  return rankTubes(pool, diversify);
}

std::vector<Proposal> filterProposals(const std::vector<Proposal>& proposals, const BoxScorer& scorer,
                                      int keepTop, std::vector<double>* scores) {
  if (keepTop < 1) fail(ErrorCode::argument, "filterProposals: keepTop must be >= 1");
  std::vector<double> s(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) s[i] = scorer.score(proposals[i].frameIndex, proposals[i].box);
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (proposals[a].frameIndex != proposals[b].frameIndex) return proposals[a].frameIndex < proposals[b].frameIndex;
    return s[a] > s[b];
  });
  std::vector<char> keep(proposals.size(), 0);
  int frame = 0, taken = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k == 0 || proposals[i].frameIndex != frame) {
      frame = proposals[i].frameIndex;
      taken = 0;
    }
    if (taken < keepTop) {
      keep[i] = 1;
      ++taken;
    }
  }
  std::vector<Proposal> out;
  if (scores) scores->clear();
  for (std::size_t i = 0; i < proposals.size(); ++i)
    if (keep[i]) {
      out.push_back(proposals[i]);
      if (scores) scores->push_back(s[i]);
    }
  return out;
}

}  // namespace moptube
