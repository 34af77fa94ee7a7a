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

#include "moptube/mops.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>

namespace moptube {

std::string toString(ProposalSource s) { return s == ProposalSource::motion ? "motion" : "static"; }

ProposalSource proposalSourceFromString(const std::string& s) {
  if (s == "motion") return ProposalSource::motion;
  if (s == "static") return ProposalSource::static_;
  fail(ErrorCode::format, "unknown proposal source: " + s);
}

std::vector<double> geodesicDistance(const BoundaryMap& b, std::span<const Pixel> seeds, double eps) {
  if (seeds.empty()) fail(ErrorCode::argument, "geodesicDistance: empty seed list");
  if (!(eps > 0.0)) fail(ErrorCode::argument, "geodesicDistance: eps must be positive");
  const int w = b.width(), h = b.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(b.size(), inf);

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (const Pixel& s : seeds) {
    if (!b.inBounds(s.x, s.y)) fail(ErrorCode::argument, "geodesicDistance: seed out of bounds");
    const std::size_t i = b.index(s.x, s.y);
    if (dist[i] != 0.0) {
      dist[i] = 0.0;
      heap.emplace(0.0, i);
    }
  }
  static constexpr int dx[4] = {1, -1, 0, 0};
  static constexpr int dy[4] = {0, 0, 1, -1};
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const std::size_t j = b.index(nx, ny);
      const double nd = d + (eps + (b[i] + b[j]) / 2.0);
      if (nd < dist[j]) {
        dist[j] = nd;
        heap.emplace(nd, j);
      }
    }
  }
  return dist;
}

namespace {

MaskFrame compareDistances(const BoundaryMap& b, const std::vector<double>& fg,
                           const std::vector<double>& bg) {
  MaskFrame mask(b.width(), b.height(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = fg[i] < bg[i] ? 1 : 0;
  return mask;
}

}  // namespace

MaskFrame figureGround(const BoundaryMap& b, const SeedSet& seeds, double eps) {
  if (seeds.fgSeeds.empty() || seeds.bgSeeds.empty())
    fail(ErrorCode::argument, "figureGround: both seed sets must be non-empty");
  for (const Pixel& f : seeds.fgSeeds)
    for (const Pixel& g : seeds.bgSeeds)
      if (f == g) fail(ErrorCode::argument, "figureGround: fg and bg seeds overlap");
  return compareDistances(b, geodesicDistance(b, seeds.fgSeeds, eps),
                          geodesicDistance(b, seeds.bgSeeds, eps));
}

std::vector<Pixel> borderSeeds(int width, int height, int stride) {
  if (width < 1 || height < 1 || stride < 1) fail(ErrorCode::argument, "borderSeeds: bad arguments");
  std::vector<Pixel> out;
  auto add = [&](int x, int y) {
    for (const Pixel& p : out)
      if (p.x == x && p.y == y) return;
    out.push_back({x, y});
  };
  for (int x = 0; x < width; x += stride) {
    add(x, 0);
    add(x, height - 1);
  }
  for (int y = 0; y < height; y += stride) {
    add(0, y);
    add(width - 1, y);
  }
  add(width - 1, 0);
  add(0, height - 1);
  add(width - 1, height - 1);
  return out;
}

std::vector<Pixel> gridSeeds(int width, int height, int count, std::uint64_t seed) {
  if (count < 1) fail(ErrorCode::argument, "gridSeeds: count must be >= 1");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  const int rows = (count + cols - 1) / cols;
  const double cw = static_cast<double>(width) / cols, ch = static_cast<double>(height) / rows;
  std::mt19937_64 rng(seed);
  std::vector<Pixel> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int r = i / cols, c = i % cols;
    const double jx = (unitReal(rng()) - 0.5) * cw, jy = (unitReal(rng()) - 0.5) * ch;
    const int x = std::clamp(static_cast<int>(std::floor((c + 0.5) * cw + jx)), 0, width - 1);
    const int y = std::clamp(static_cast<int>(std::floor((r + 0.5) * ch + jy)), 0, height - 1);
    out.push_back({x, y});
  }
  return out;
}

std::vector<Proposal> generateProposals(const BoundaryMap& b, const ProposalParams& params,
                                        std::uint64_t seed, int frameIndex, ProposalSource source) {
  if (params.numSeeds < 1) fail(ErrorCode::argument, "generateProposals: numSeeds must be >= 1");
  const std::vector<Pixel> bg = borderSeeds(b.width(), b.height(), params.bgStride);
  const std::vector<double> bgDist = geodesicDistance(b, bg, params.eps);

  std::vector<Proposal> out;
  for (const Pixel& s : gridSeeds(b.width(), b.height(), params.numSeeds, seed)) {
    if (bgDist[b.index(s.x, s.y)] == 0.0) continue;  // collides with a border seed
    const Pixel fg[1] = {s};
    MaskFrame mask = compareDistances(b, geodesicDistance(b, fg, params.eps), bgDist);
    if (maskArea(mask) == 0) continue;
    bool duplicate = false;
    for (const Proposal& kept : out) {
      if (maskIoU(kept.mask, mask) >= params.dedupThreshold) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    Proposal p;
    p.box = boundingBox(mask);
    p.mask = std::move(mask);
    p.frameIndex = frameIndex;
    p.source = source;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace moptube
