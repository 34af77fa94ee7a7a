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

#include "moptube/trajectories.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

Point2 sampleFlow(const FlowField& flow, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(flow.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(flow.height - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, flow.width - 1), y1 = std::min(y0 + 1, flow.height - 1);
  const double ax = x - x0, ay = y - y0;
  auto lerp = [&](const std::vector<float>& c) {
    const double top = (1 - ax) * c[flow.index(x0, y0)] + ax * c[flow.index(x1, y0)];
    const double bot = (1 - ax) * c[flow.index(x0, y1)] + ax * c[flow.index(x1, y1)];
    return (1 - ay) * top + ay * bot;
  };
  return {lerp(flow.u), lerp(flow.v)};
}

TrajectorySet linkTrajectories(std::span<const FlowField> forward,
                               std::span<const FlowField> backward, const TrackParams& params) {
  if (forward.empty()) fail(ErrorCode::argument, "linkTrajectories: need at least one flow field");
  if (forward.size() != backward.size())
    fail(ErrorCode::argument, "linkTrajectories: forward/backward flow count mismatch");
  if (params.stride < 1) fail(ErrorCode::argument, "linkTrajectories: stride must be >= 1");
  const int w = forward[0].width, h = forward[0].height;
  for (std::size_t t = 0; t < forward.size(); ++t)
    if (forward[t].width != w || forward[t].height != h || backward[t].width != w ||
        backward[t].height != h)
      fail(ErrorCode::argument, "linkTrajectories: flow dimensions differ");

  const int s = params.stride;
  const int cellsX = (w + s - 1) / s, cellsY = (h + s - 1) / s;
  std::vector<Trajectory> all;
  std::vector<std::size_t> live;
  std::vector<int> occupied(static_cast<std::size_t>(cellsX) * cellsY, -1);
  auto cellOf = [&](const Point2& p) {
    const int cx = std::min(static_cast<int>(std::floor(p.x)) / s, cellsX - 1);
    const int cy = std::min(static_cast<int>(std::floor(p.y)) / s, cellsY - 1);
    return static_cast<std::size_t>(cy) * cellsX + cx;
  };
  auto reseed = [&](int frame) {
    for (int cy = 0; cy < cellsY; ++cy)
      for (int cx = 0; cx < cellsX; ++cx) {
        const std::size_t c = static_cast<std::size_t>(cy) * cellsX + cx;
        if (occupied[c] >= 0) continue;
        Trajectory tr;
        tr.startFrame = frame;
        tr.points.push_back({static_cast<double>(cx * s), static_cast<double>(cy * s)});
        occupied[c] = static_cast<int>(all.size());
        live.push_back(all.size());
        all.push_back(std::move(tr));
      }
  };
  reseed(0);

  const int frameCount = static_cast<int>(forward.size()) + 1;
  for (int t = 0; t + 1 < frameCount; ++t) {
    std::fill(occupied.begin(), occupied.end(), -1);
    std::vector<std::size_t> next;
    next.reserve(live.size());
    // `live` is in creation order, so the lower id wins a contested cell.
    for (std::size_t idx : live) {
      const Point2 p = all[idx].points.back();
      const Point2 f = sampleFlow(forward[t], p.x, p.y);
      const Point2 q{p.x + f.x, p.y + f.y};
      if (!(q.x >= 0.0 && q.y >= 0.0 && q.x <= w - 1 && q.y <= h - 1)) continue;
      const Point2 b = sampleFlow(backward[t], q.x, q.y);
      const double ex = f.x + b.x, ey = f.y + b.y;
      const double fwd2 = f.x * f.x + f.y * f.y, bwd2 = b.x * b.x + b.y * b.y;
      if (ex * ex + ey * ey > params.thetaA + params.thetaR * (fwd2 + bwd2)) continue;
      const std::size_t c = cellOf(q);
      if (occupied[c] >= 0) continue;
      occupied[c] = static_cast<int>(idx);
      all[idx].points.push_back(q);
      next.push_back(idx);
    }
    live = std::move(next);
    reseed(t + 1);
  }

  TrajectorySet ts;
  ts.frameCount = frameCount;
  ts.width = w;
  ts.height = h;
  for (auto& tr : all) {
    if (tr.points.size() < 2) continue;
    tr.id = static_cast<int>(ts.trajectories.size());
    ts.trajectories.push_back(std::move(tr));
  }
  return ts;
}

void saveTrajectories(const TrajectorySet& ts, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  out << json{{"frameCount", ts.frameCount}, {"width", ts.width}, {"height", ts.height}}.dump()
      << '\n';
  for (const auto& tr : ts.trajectories) {
    json pts = json::array();
    for (const auto& p : tr.points) pts.push_back({p.x, p.y});
    out << json{{"id", tr.id}, {"startFrame", tr.startFrame}, {"points", pts}}.dump() << '\n';
  }
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

TrajectorySet loadTrajectories(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open: " + path.string());
  TrajectorySet ts;
  std::string line;
  bool header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!header) {
        ts.frameCount = j.at("frameCount").get<int>();
        ts.width = j.at("width").get<int>();
        ts.height = j.at("height").get<int>();
        header = true;
        continue;
      }
      Trajectory tr;
      tr.id = j.at("id").get<int>();
      tr.startFrame = j.at("startFrame").get<int>();
      for (const auto& p : j.at("points")) tr.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      if (tr.id != static_cast<int>(ts.trajectories.size()))
        fail(ErrorCode::format, "trajectory ids must be dense and ordered: " + path.string());
      if (tr.points.size() < 2) fail(ErrorCode::format, "trajectory shorter than 2 frames: " + path.string());
      ts.trajectories.push_back(std::move(tr));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad trajectory file " + path.string() + ": " + e.what());
  }
  if (!header) fail(ErrorCode::format, "missing trajectory header: " + path.string());
  return ts;
}

}  // namespace moptube
