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

#include "moptube/tubes.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

namespace {

struct UnionFind {
  std::vector<int> parent;
  int add() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  // Smaller root wins, so the result does not depend on argument order.
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// Dense relabeling in row-major order of first appearance.
int compact(Grid<int>& labels) {
  std::map<int, int> remap;
  for (auto& l : labels.data()) {
    auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  return static_cast<int>(remap.size());
}

}  // namespace

Partition superpixels(const BoundaryMap& b, const SuperpixelParams& params) {
  const int w = b.width(), h = b.height();
  std::vector<std::size_t> order(b.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return b[p] < b[q]; });

  Grid<int> label(w, h, -1);
  UnionFind uf;
  for (std::size_t p : order) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    int weakest = -1;
    double weakestStrength = 0.0;
    bool any = false;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k], ny = y + kDy[k];
      if (!label.inBounds(nx, ny) || label(nx, ny) < 0) continue;
      const std::size_t q = label.index(nx, ny);
      const int root = uf.find(label[q]);
      if (b[p] <= params.thetaSp) {
        if (any) uf.unite(label[p], root);
        else label[p] = root;
      } else if (!any || b[q] < weakestStrength ||
                 (b[q] == weakestStrength && root < uf.find(weakest))) {
        weakest = root;
        weakestStrength = b[q];
      }
      any = true;
    }
    if (!any) label[p] = uf.add();
    else if (b[p] > params.thetaSp) label[p] = weakest;
  }
  for (auto& l : label.data()) l = uf.find(l);
  int count = compact(label);

  // Merge undersized regions, smallest first, into their longest-border
  // neighbour.
  while (count > 1 && params.minArea > 1) {
    std::vector<long long> area(count, 0);
    std::map<std::pair<int, int>, long long> border;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int a = label(x, y);
        ++area[a];
        if (x + 1 < w && label(x + 1, y) != a) {
          ++border[{a, label(x + 1, y)}];
          ++border[{label(x + 1, y), a}];
        }
        if (y + 1 < h && label(x, y + 1) != a) {
          ++border[{a, label(x, y + 1)}];
          ++border[{label(x, y + 1), a}];
        }
      }
    int small = -1;
    for (int r = 0; r < count; ++r)
      if (area[r] < params.minArea && (small < 0 || area[r] < area[small])) small = r;
    if (small < 0) break;
    int target = -1;
    long long best = 0;
    for (auto it = border.lower_bound({small, -1}); it != border.end() && it->first.first == small; ++it)
      if (it->second > best) {
        best = it->second;
        target = it->first.second;
      }
    if (target < 0) break;
    for (auto& l : label.data())
      if (l == small) l = target;
    count = compact(label);
  }
  return {std::move(label), count};
}

SupervoxelSet buildSupervoxels(std::vector<Partition> partitions, std::span<const FlowField> flows,
                               double thetaLink) {
  const int frames = static_cast<int>(partitions.size());
  if (frames == 0) fail(ErrorCode::argument, "buildSupervoxels: no partitions");
  if (flows.size() + 1 != partitions.size())
    fail(ErrorCode::argument, "buildSupervoxels: need one flow per frame transition");
  const int w = partitions[0].labels.width(), h = partitions[0].labels.height();
  for (const auto& p : partitions)
    if (p.labels.width() != w || p.labels.height() != h)
      fail(ErrorCode::argument, "buildSupervoxels: partition dimensions differ");

  SupervoxelSet out;
  out.owner.resize(frames);
  out.owner[0].resize(partitions[0].count);
  for (int r = 0; r < partitions[0].count; ++r) {
    out.owner[0][r] = r;
    out.supervoxels.push_back({r, 0, {r}});
  }

  for (int t = 0; t + 1 < frames; ++t) {
    const Partition& cur = partitions[t];
    const Partition& nxt = partitions[t + 1];
    const FlowField& f = flows[t];
    if (f.width != w || f.height != h) fail(ErrorCode::argument, "buildSupervoxels: flow dimensions differ");
    std::map<std::pair<int, int>, long long> overlap;
    std::vector<long long> warped(cur.count, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = f.index(x, y);
        const long long qx = std::llround(x + static_cast<double>(f.u[i]));
        const long long qy = std::llround(y + static_cast<double>(f.v[i]));
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        const int r = cur.labels(x, y);
        ++warped[r];
        ++overlap[{r, nxt.labels(static_cast<int>(qx), static_cast<int>(qy))}];
      }
    std::vector<int> fwd(cur.count, -1), bwd(nxt.count, -1);
    std::vector<double> fwdShare(cur.count, -1.0), bwdShare(nxt.count, -1.0);
    for (const auto& [key, n] : overlap) {  // ascending (r, r') keeps ties deterministic
      const auto [r, rn] = key;
      const double share = static_cast<double>(n) / static_cast<double>(warped[r]);
      if (share > fwdShare[r]) {
        fwdShare[r] = share;
        fwd[r] = rn;
      }
      if (share > bwdShare[rn]) {
        bwdShare[rn] = share;
        bwd[rn] = r;
      }
    }
    out.owner[t + 1].assign(nxt.count, -1);
    for (int r = 0; r < cur.count; ++r) {
      const int rn = fwd[r];
      if (rn >= 0 && bwd[rn] == r && fwdShare[r] >= thetaLink) {
        const int sv = out.owner[t][r];
        out.owner[t + 1][rn] = sv;
        out.supervoxels[sv].regions.push_back(rn);
      }
    }
    for (int rn = 0; rn < nxt.count; ++rn)
      if (out.owner[t + 1][rn] < 0) {
        const int sv = static_cast<int>(out.supervoxels.size());
        out.owner[t + 1][rn] = sv;
        out.supervoxels.push_back({sv, t + 1, {rn}});
      }
  }
  out.partitions = std::move(partitions);
  return out;
}

Projection projectCluster(const TrajectoryCluster& c, const TrajectorySet& ts, const SupervoxelSet& svs,
                          double thresh) {
  if (c.members.empty()) fail(ErrorCode::argument, "projectCluster: empty cluster");
  const int frames = static_cast<int>(svs.partitions.size());
  if (ts.frameCount > frames) fail(ErrorCode::argument, "projectCluster: trajectories outlive supervoxels");
  const int w = svs.partitions[0].labels.width(), h = svs.partitions[0].labels.height();
  std::vector<char> member(ts.n(), 0);
  for (int i : c.members) {
    if (i < 0 || static_cast<std::size_t>(i) >= ts.n()) fail(ErrorCode::argument, "projectCluster: bad member id");
    member[i] = 1;
  }
  const std::size_t nsv = svs.supervoxels.size();
  std::vector<long long> inside(nsv, 0), total(nsv, 0);
  for (const auto& tr : ts.trajectories)
    for (int t = tr.startFrame; t <= tr.endFrame(); ++t) {
      const Point2& p = tr.at(t);
      const int x = std::clamp(static_cast<int>(std::lround(p.x)), 0, w - 1);
      const int y = std::clamp(static_cast<int>(std::lround(p.y)), 0, h - 1);
      const int sv = svs.supervoxelAt(t, x, y);
      ++total[sv];
      if (member[tr.id]) ++inside[sv];
    }

  Projection out;
  out.weights.assign(nsv, 0.0);
  std::vector<char> keep(nsv, 0);
  for (std::size_t s = 0; s < nsv; ++s) {
    out.weights[s] = total[s] > 0 ? static_cast<double>(inside[s]) / static_cast<double>(total[s]) : 0.0;
    if (out.weights[s] >= thresh) {
      keep[s] = 1;
      out.selected.push_back(static_cast<int>(s));
    }
  }

  std::vector<MaskFrame> masks;
  std::vector<long long> area(frames, 0);
  for (int t = 0; t < frames; ++t) {
    MaskFrame m(w, h, 0);
    const auto& labels = svs.partitions[t].labels;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (keep[svs.owner[t][labels[i]]]) {
        m[i] = 1;
        ++area[t];
      }
    masks.push_back(std::move(m));
  }
  int bestStart = -1, bestEnd = -1;
  long long bestVolume = 0;
  for (int t = 0; t < frames;) {
    if (area[t] == 0) {
      ++t;
      continue;
    }
    int e = t;
    long long vol = 0;
    while (e < frames && area[e] > 0) vol += area[e++];
    if (vol > bestVolume) {
      bestVolume = vol;
      bestStart = t;
      bestEnd = e - 1;
    }
    t = e;
  }
  if (bestStart < 0) fail(ErrorCode::data, "empty projection");
  out.tube.width = w;
  out.tube.height = h;
  out.tube.first = bestStart;
  for (int t = bestStart; t <= bestEnd; ++t) out.tube.masks.push_back(std::move(masks[t]));
  out.tube.refreshBoxes();
  return out;
}

void saveSupervoxels(const SupervoxelSet& svs, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["frameCount"] = svs.partitions.size();
  char buf[48];
  for (std::size_t t = 0; t < svs.partitions.size(); ++t) {
    const auto& p = svs.partitions[t];
    if (p.count > 65536) fail(ErrorCode::data, "too many regions for a 16-bit label image");
    Grid<std::uint16_t> g(p.labels.width(), p.labels.height(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::uint16_t>(p.labels[i]);
    std::snprintf(buf, sizeof buf, "labels_%04zu.pgm", t);
    saveLabels16(g, dir / buf);
    j["labelImages"].push_back(buf);
    j["regionCounts"].push_back(p.count);
  }
  j["supervoxels"] = json::array();
  for (const auto& sv : svs.supervoxels)
    j["supervoxels"].push_back({{"id", sv.id}, {"first", sv.first}, {"regions", sv.regions}});
  std::ofstream out(dir / "supervoxels.json");
  if (!out) fail(ErrorCode::io, "cannot write supervoxel index in " + dir.string());
  out << j.dump() << '\n';
}

SupervoxelSet loadSupervoxels(const fs::path& dir) {
  std::ifstream in(dir / "supervoxels.json");
  if (!in) fail(ErrorCode::io, "cannot open supervoxel index in " + dir.string());
  SupervoxelSet svs;
  try {
    const json j = json::parse(in);
    const auto& images = j.at("labelImages");
    const auto& counts = j.at("regionCounts");
    for (std::size_t t = 0; t < images.size(); ++t) {
      const auto g = loadLabels16(dir / images[t].get<std::string>());
      Partition p{Grid<int>(g.width(), g.height(), 0), counts.at(t).get<int>()};
      for (std::size_t i = 0; i < g.size(); ++i) {
        p.labels[i] = g[i];
        if (g[i] >= p.count) fail(ErrorCode::format, "label exceeds region count in " + dir.string());
      }
      svs.partitions.push_back(std::move(p));
    }
    svs.owner.resize(svs.partitions.size());
    for (std::size_t t = 0; t < svs.partitions.size(); ++t) svs.owner[t].assign(svs.partitions[t].count, -1);
    for (const auto& s : j.at("supervoxels")) {
      Supervoxel sv{s.at("id").get<int>(), s.at("first").get<int>(), s.at("regions").get<std::vector<int>>()};
      if (sv.id != static_cast<int>(svs.supervoxels.size()))
        fail(ErrorCode::format, "supervoxel ids must be dense in " + dir.string());
      for (std::size_t k = 0; k < sv.regions.size(); ++k) {
        const std::size_t t = static_cast<std::size_t>(sv.first) + k;
        if (t >= svs.owner.size() || sv.regions[k] < 0 || sv.regions[k] >= svs.partitions[t].count)
          fail(ErrorCode::format, "supervoxel chain out of range in " + dir.string());
        svs.owner[t][sv.regions[k]] = sv.id;
      }
      svs.supervoxels.push_back(std::move(sv));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad supervoxel index in " + dir.string() + ": " + e.what());
  }
  for (const auto& o : svs.owner)
    for (int v : o)
      if (v < 0) fail(ErrorCode::format, "region without supervoxel in " + dir.string());
  return svs;
}

}  // namespace moptube
