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

#include "moptube/affinity.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace moptube {

SparseAffinity::SparseAffinity(int n, std::vector<AffinityEntry> entries) : n_(n) {
  if (n < 0) fail(ErrorCode::argument, "SparseAffinity: negative node count");
  for (auto& e : entries) {
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i == e.j) fail(ErrorCode::argument, "SparseAffinity: self-loop");
    if (e.i < 0 || e.j >= n) fail(ErrorCode::argument, "SparseAffinity: node index out of range");
    if (!(e.w > 0.0 && e.w <= 1.0)) fail(ErrorCode::argument, "SparseAffinity: weight outside (0,1]");
  }
  std::sort(entries.begin(), entries.end(), [](const AffinityEntry& a, const AffinityEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 1; k < entries.size(); ++k)
    if (entries[k].i == entries[k - 1].i && entries[k].j == entries[k - 1].j)
      fail(ErrorCode::argument, "SparseAffinity: duplicate pair");
  entries_ = std::move(entries);

  std::vector<std::size_t> count(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& e : entries_) {
    ++count[e.i + 1];
    ++count[e.j + 1];
  }
  rowStart_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) rowStart_[i + 1] = rowStart_[i] + count[i + 1];
  cols_.resize(rowStart_[n]);
  vals_.resize(rowStart_[n]);
  std::vector<std::size_t> fill(rowStart_.begin(), rowStart_.end() - 1);
  // Entries are sorted by (i, j), so rows fill in ascending neighbour order
  // for the j side; the i side of row j is filled by smaller i first too.
  for (const auto& e : entries_) {
    cols_[fill[e.j]] = e.i;
    vals_[fill[e.j]++] = e.w;
  }
  for (const auto& e : entries_) {
    cols_[fill[e.i]] = e.j;
    vals_[fill[e.i]++] = e.w;
  }
  degree_.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (std::size_t k = rowStart_[i]; k < rowStart_[i + 1]; ++k) degree_[i] += vals_[k];
}

double SparseAffinity::weight(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) fail(ErrorCode::argument, "weight: index out of range");
  const auto nb = neighbors(i);
  const auto it = std::lower_bound(nb.begin(), nb.end(), j);
  if (it == nb.end() || *it != j) return 0.0;
  return weights(i)[static_cast<std::size_t>(it - nb.begin())];
}

std::vector<double> Laplacian::apply(std::span<const double> x) const {
  const SparseAffinity& a = *a_;
  if (x.size() != static_cast<std::size_t>(a.n())) fail(ErrorCode::argument, "Laplacian: length mismatch");
  std::vector<double> y(x.size(), 0.0);
  for (int i = 0; i < a.n(); ++i) {
    const auto nb = a.neighbors(i);
    const auto wt = a.weights(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) acc += wt[k] * (x[i] - x[nb[k]]);
    y[i] = acc;
  }
  return y;
}

Point2 windowedVelocity(const Trajectory& tr, int t, int window) {
  const int end = std::min(t + std::max(window, 1), tr.endFrame());
  if (t < tr.startFrame || end <= t) fail(ErrorCode::argument, "windowedVelocity: no forward frame");
  const Point2& a = tr.at(t);
  const Point2& b = tr.at(end);
  return {(b.x - a.x) / (end - t), (b.y - a.y) / (end - t)};
}

double maxVelocityDifference2(const Trajectory& a, const Trajectory& b, int window) {
  const int lo = std::max(a.startFrame, b.startFrame);
  const int hi = std::min(a.endFrame(), b.endFrame());
  if (hi - lo < 1) return -1.0;
  double best = 0.0;
  for (int t = lo; t < hi; ++t) {
    const Point2 va = windowedVelocity(a, t, window), vb = windowedVelocity(b, t, window);
    const double dx = va.x - vb.x, dy = va.y - vb.y;
    best = std::max(best, dx * dx + dy * dy);
  }
  return best;
}

SparseAffinity buildAffinity(const TrajectorySet& ts, const AffinityParams& p, int threads) {
  if (!(p.radius >= 0.0) || !(p.lambda >= 0.0) || p.window < 1 || p.minOverlap < 1 || !(p.epsA >= 0.0))
    fail(ErrorCode::argument, "buildAffinity: parameter out of range");
  const int n = static_cast<int>(ts.n());
  if (n < 1) return SparseAffinity(0, {});

  // Per-frame spatial bins of radius-sized cells.
  const double cell = std::max(p.radius, 1.0);
  const int bx = static_cast<int>(std::ceil(std::max(ts.width, 1) / cell)) + 1;
  const int by = static_cast<int>(std::ceil(std::max(ts.height, 1) / cell)) + 1;
  auto binOf = [&](const Point2& q) {
    const int cx = std::clamp(static_cast<int>(std::floor(q.x / cell)), 0, bx - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(q.y / cell)), 0, by - 1);
    return std::pair{cx, cy};
  };
  std::vector<std::vector<std::vector<int>>> bins(
      static_cast<std::size_t>(ts.frameCount),
      std::vector<std::vector<int>>(static_cast<std::size_t>(bx) * by));
  for (const auto& tr : ts.trajectories)
    for (int t = tr.startFrame; t <= tr.endFrame(); ++t) {
      const auto [cx, cy] = binOf(tr.at(t));
      bins[t][static_cast<std::size_t>(cy) * bx + cx].push_back(tr.id);
    }

  const double r2 = p.radius * p.radius;
  std::vector<std::vector<AffinityEntry>> rows(n);
  parallelFor(static_cast<std::size_t>(n), threads, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    const Trajectory& a = ts.trajectories[i];
    std::vector<int> near;
    for (int t = a.startFrame; t <= a.endFrame(); ++t) {
      const Point2& pa = a.at(t);
      const auto [cx, cy] = binOf(pa);
      for (int yy = std::max(cy - 1, 0); yy <= std::min(cy + 1, by - 1); ++yy)
        for (int xx = std::max(cx - 1, 0); xx <= std::min(cx + 1, bx - 1); ++xx)
          for (int j : bins[t][static_cast<std::size_t>(yy) * bx + xx]) {
            if (j <= i) continue;
            const Point2& pb = ts.trajectories[j].at(t);
            const double dx = pa.x - pb.x, dy = pa.y - pb.y;
            if (dx * dx + dy * dy <= r2) near.push_back(j);
          }
    }
    std::sort(near.begin(), near.end());
    near.erase(std::unique(near.begin(), near.end()), near.end());
    for (int j : near) {
      const Trajectory& b = ts.trajectories[j];
      const int overlap = std::min(a.endFrame(), b.endFrame()) - std::max(a.startFrame, b.startFrame) + 1;
      if (overlap < p.minOverlap) continue;
      const double d2 = maxVelocityDifference2(a, b, p.window);
      if (d2 < 0.0) continue;
      const double w = std::exp(-p.lambda * d2);
      if (w < p.epsA || !(w > 0.0)) continue;
      rows[i].push_back({i, j, w});
    }
  });

  std::vector<AffinityEntry> entries;
  for (auto& r : rows) entries.insert(entries.end(), r.begin(), r.end());
  return SparseAffinity(n, std::move(entries));
}

double quadraticForm(const Laplacian& laplacian, std::span<const double> x) {
  const SparseAffinity& a = laplacian.affinity();
  if (x.size() != static_cast<std::size_t>(a.n())) fail(ErrorCode::argument, "quadraticForm: length mismatch");
  // Each unordered pair appears once in entries(), which is exactly the
  // (1/2) sum over ordered pairs.
  double q = 0.0;
  for (const auto& e : a.entries()) {
    const double d = x[e.i] - x[e.j];
    q += e.w * d * d;
  }
  return q;
}

void saveAffinity(const SparseAffinity& a, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  out << a.n() << ' ' << a.entries().size() << '\n';
  char buf[96];
  for (const auto& e : a.entries()) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g\n", e.i, e.j, e.w);
    out << buf;
  }
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

SparseAffinity loadAffinity(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open: " + path.string());
  long long n = -1, m = -1;
  if (!(in >> n >> m) || n < 0 || m < 0) fail(ErrorCode::format, "bad affinity header: " + path.string());
  std::vector<AffinityEntry> entries;
  entries.reserve(static_cast<std::size_t>(m));
  for (long long k = 0; k < m; ++k) {
    AffinityEntry e;
    if (!(in >> e.i >> e.j >> e.w)) fail(ErrorCode::format, "truncated affinity file: " + path.string());
    entries.push_back(e);
  }
  try {
    return SparseAffinity(static_cast<int>(n), std::move(entries));
  } catch (const Error& e) {
    fail(ErrorCode::format, std::string(e.what()) + ": " + path.string());
  }
}

}  // namespace moptube
