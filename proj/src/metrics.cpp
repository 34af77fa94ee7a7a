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

#include "moptube/metrics.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

double tubeIoU(const Tube& a, const Tube& b) {
  if (a.width != b.width || a.height != b.height) fail(ErrorCode::argument, "tubeIoU: dimension mismatch");
  long long inter = 0;
  const int lo = std::max(a.first, b.first), hi = std::min(a.last(), b.last());
  for (int t = lo; t <= hi; ++t) {
    const MaskFrame& ma = a.masks[t - a.first];
    const MaskFrame& mb = b.masks[t - b.first];
    for (std::size_t i = 0; i < ma.size(); ++i) inter += (ma[i] && mb[i]) ? 1 : 0;
  }
  const long long uni = a.volume() + b.volume() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Aggregates aggregate(std::span<const GtMatch> matches) {
  Aggregates agg;
  if (matches.empty()) return agg;
  double areaSum = 0.0, weighted = 0.0;
  for (const auto& m : matches) {
    agg.averageBestOverlap += m.bestIoU;
    weighted += static_cast<double>(m.area) * m.bestIoU;
    areaSum += static_cast<double>(m.area);
    agg.det50 += m.bestIoU >= 0.5 ? 1.0 : 0.0;
    agg.det70 += m.bestIoU >= 0.7 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(matches.size());
  agg.averageBestOverlap /= n;
  agg.det50 /= n;
  agg.det70 /= n;
  agg.coverage = areaSum > 0.0 ? weighted / areaSum : 0.0;
  return agg;
}

std::vector<int> defaultPoolSizes() {
  std::vector<int> s;
  for (int v = 1; v <= 1024; v *= 2) s.push_back(v);
  return s;
}

EvalReport evaluate(std::span<const Tube> ranked, std::span<const Tube> gt, std::span<const int> atSizes) {
  if (gt.empty()) fail(ErrorCode::argument, "evaluate: ground truth is empty");
  for (int s : atSizes)
    if (s < 1) fail(ErrorCode::argument, "evaluate: pool sizes must be >= 1");
  const std::size_t p = ranked.size(), g = gt.size();
  std::vector<double> iou(p * g, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < g; ++k) iou[i * g + k] = tubeIoU(ranked[i], gt[k]);

  auto matchPrefix = [&](std::size_t size) {
    std::vector<GtMatch> matches(g);
    for (std::size_t k = 0; k < g; ++k) {
      matches[k].gt = static_cast<int>(k);
      matches[k].area = gt[k].volume();
      for (std::size_t i = 0; i < std::min(size, p); ++i)
        if (iou[i * g + k] > matches[k].bestIoU) {
          matches[k].bestIoU = iou[i * g + k];
          matches[k].proposal = static_cast<int>(i);
        }
    }
    return matches;
  };

  EvalReport report;
  report.perGt = matchPrefix(p);
  report.aggregates = aggregate(report.perGt);
  std::vector<int> sizes(atSizes.begin(), atSizes.end());
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  for (int s : sizes) {
    const auto m = matchPrefix(static_cast<std::size_t>(s));
    report.curve.push_back({s, aggregate(m)});
  }
  return report;
}

EvalReport evaluatePerFrame(std::span<const Proposal> proposals, std::span<const Tube> gt) {
  if (gt.empty()) fail(ErrorCode::argument, "evaluatePerFrame: ground truth is empty");
  EvalReport report;
  report.hasAnytime = true;
  std::vector<GtMatch> segments;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const Tube& g = gt[k];
    GtMatch tubeBest;
    tubeBest.gt = static_cast<int>(k);
    tubeBest.area = g.volume();
    for (int t = g.first; t <= g.last(); ++t) {
      const MaskFrame& m = g.masks[t - g.first];
      const long long area = maskArea(m);
      if (area == 0) continue;
      GtMatch seg;
      seg.gt = static_cast<int>(k);
      seg.frame = t;
      seg.area = area;
      for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (proposals[i].frameIndex != t) continue;
        if (proposals[i].mask.width() != g.width || proposals[i].mask.height() != g.height)
          fail(ErrorCode::argument, "evaluatePerFrame: dimension mismatch");
        const double v = maskIoU(proposals[i].mask, m);
        if (v > seg.bestIoU) {
          seg.bestIoU = v;
          seg.proposal = static_cast<int>(i);
        }
      }
      if (seg.bestIoU > tubeBest.bestIoU) {
        tubeBest.bestIoU = seg.bestIoU;
        tubeBest.proposal = seg.proposal;
        tubeBest.frame = t;
      }
      segments.push_back(seg);
    }
    report.perGt.push_back(tubeBest);
  }
  report.aggregates = aggregate(segments);
  const Aggregates ab = aggregate(report.perGt);
  report.anytime = {ab.averageBestOverlap, ab.det50, ab.det70};
  return report;
}

void saveReport(const EvalReport& r, const fs::path& path) {
  auto agg = [](const Aggregates& a) {
    return json{{"averageBestOverlap", a.averageBestOverlap},
                {"coverage", a.coverage},
                {"det50", a.det50},
                {"det70", a.det70}};
  };
  json j;
  j["perGt"] = json::array();
  for (const auto& m : r.perGt) {
    json e = {{"gt", m.gt}, {"bestIoU", m.bestIoU}, {"proposal", m.proposal}, {"area", m.area}};
    if (m.frame >= 0) e["frame"] = m.frame;
    j["perGt"].push_back(e);
  }
  j["aggregates"] = agg(r.aggregates);
  if (r.hasAnytime)
    j["anytime"] = {{"averageBestOverlap", r.anytime.averageBestOverlap},
                    {"det50", r.anytime.det50},
                    {"det70", r.anytime.det70}};
  j["curve"] = json::array();
  for (const auto& c : r.curve) {
    json e = agg(c.at);
    e["poolSize"] = c.poolSize;
    j["curve"].push_back(e);
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

void saveCurveCsv(const EvalReport& r, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  out << "pool_size,mean_best_iou,coverage,det50,det70\n";
  char buf[160];
  for (const auto& c : r.curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", c.poolSize, c.at.averageBestOverlap,
                  c.at.coverage, c.at.det50, c.at.det70);
    out << buf;
  }
}

}  // namespace moptube
