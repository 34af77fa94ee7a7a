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


#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "graphs.hpp"
#include "moptube/randomwalk.hpp"
#include "support.hpp"

using namespace moptube;
using moptube::testing::denseHarmonic;
using moptube::testing::randomLabeledGraph;

namespace {

SparseAffinity path3() { return SparseAffinity(3, {{0, 1, 1.0}, {1, 2, 1.0}}); }

double maxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<int> ids(int lo, int hi) {
  std::vector<int> v;
  for (int i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST_CASE("path graph interpolates harmonically") {
  const std::vector<int> f = {0}, b = {2};
  const LabelAssignment la = makeAssignment(3, f, b);
  const LabelAssignment ex = solveExact(path3(), la);
  CHECK(ex.x[0] == 1.0);
  CHECK(ex.x[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ex.x[2] == 0.0);
  CHECK(!ex.unreachable);
  const LabelAssignment df = diffuse(path3(), la, 50);
  CHECK(std::abs(df.x[1] - 0.5) < 1e-6);
}

TEST_CASE("two disconnected cliques take their seed values") {
  const SparseAffinity a = [] {
    std::vector<AffinityEntry> e;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) e.push_back({5 * c + i, 5 * c + j, 0.7});
    return SparseAffinity(10, std::move(e));
  }();
  const std::vector<int> f = {2}, b = {7};
  const LabelAssignment ex = solveExact(a, makeAssignment(10, f, b));
  for (int i = 0; i < 5; ++i) CHECK(ex.x[i] == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 5; i < 10; ++i) CHECK(ex.x[i] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("unreachable components are background and flagged") {
  const SparseAffinity a(5, {{0, 1, 1.0}, {1, 2, 1.0}, {3, 4, 0.5}});
  const std::vector<int> f = {0}, b = {};
  const LabelAssignment ex = solveExact(a, makeAssignment(5, f, b));
  CHECK(ex.unreachable);
  CHECK(ex.x[1] == doctest::Approx(1.0));
  CHECK(ex.x[3] == 0.0);
  CHECK(ex.x[4] == 0.0);
}

TEST_CASE("empty foreground yields zero everywhere") {
  const std::vector<int> f = {}, b = {1};
  const LabelAssignment ex = solveExact(path3(), makeAssignment(3, f, b));
  for (double v : ex.x) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("makeAssignment rejects overlapping marks") {
  const std::vector<int> f = {1}, b = {1};
  CHECK_THROWS(makeAssignment(3, f, b));
}

TEST_CASE("zero iterations leave x unchanged") {
  const auto g = randomLabeledGraph(3);
  const LabelAssignment out = diffuse(g.affinity, g.labels, 0);
  CHECK(out.x == g.labels.x);
}

TEST_CASE("exact solve matches a dense direct solve; diffusion converges to it") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto g = randomLabeledGraph(seed);
    const LabelAssignment ex = solveExact(g.affinity, g.labels);
    CHECK(maxAbsDiff(ex.x, denseHarmonic(g.affinity, g.labels)) <= 1e-8);
    // The max-norm error never grows; enough steps reach the exact solution.
    double prev = maxAbsDiff(ex.x, g.labels.x);
    for (int iters : {1, 10, 50, 200, 500}) {
      const double err = maxAbsDiff(ex.x, diffuse(g.affinity, g.labels, iters).x);
      CHECK(err <= prev + 1e-15);
      prev = err;
    }
    CHECK(maxAbsDiff(ex.x, diffuse(g.affinity, g.labels, 20000).x) <= 1e-8);
  }
}

TEST_CASE("exact solution is a diffusion fixed point and minimizes the objective") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    const auto g = randomLabeledGraph(seed);
    const LabelAssignment ex = solveExact(g.affinity, g.labels);
    const LabelAssignment once = diffuse(g.affinity, ex, 1);
    CHECK(maxAbsDiff(ex.x, once.x) <= 1e-12);

    const Laplacian L(g.affinity);
    const double best = quadraticForm(L, ex.x);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y = ex.x;
    for (int trial = 0; trial < 200; ++trial) {
      for (std::size_t i = 0; i < y.size(); ++i)
        if (g.labels.marks[i] == Mark::unlabeled) y[i] = trial % 2 ? u(rng) : ex.x[i] + 1e-3 * (u(rng) - 0.5);
      CHECK(quadraticForm(L, y) >= best - 1e-12);
    }
    const double q50 = quadraticForm(L, diffuse(g.affinity, g.labels, 50).x);
    const double q1 = quadraticForm(L, diffuse(g.affinity, g.labels, 1).x);
    CHECK(best <= q50 + 1e-12);
    CHECK(q50 <= q1 + 1e-12);
  }
}

TEST_CASE("maximum principle and label swap symmetry") {
  for (std::uint64_t seed = 300; seed < 320; ++seed) {
    const auto g = randomLabeledGraph(seed);
    const LabelAssignment ex = solveExact(g.affinity, g.labels);
    const LabelAssignment sw = solveExact(g.affinity, swapLabels(g.labels));
    for (std::size_t i = 0; i < ex.n(); ++i) {
      CHECK(ex.x[i] >= 0.0);
      CHECK(ex.x[i] <= 1.0);
      CHECK(sw.x[i] == doctest::Approx(1.0 - ex.x[i]).epsilon(1e-15));
    }
    LabelAssignment step = g.labels;
    const LabelAssignment swStart = swapLabels(g.labels);
    for (int it = 1; it <= 20; ++it) {
      const LabelAssignment d = diffuse(g.affinity, g.labels, it);
      const LabelAssignment ds = diffuse(g.affinity, swStart, it);
      for (std::size_t i = 0; i < d.n(); ++i) {
        CHECK(d.x[i] >= 0.0);
        CHECK(d.x[i] <= 1.0);
        CHECK(ds.x[i] == doctest::Approx(1.0 - d.x[i]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("swapLabels exchanges marks") {
  const std::vector<int> f = {0}, b = {2};
  const LabelAssignment s = swapLabels(makeAssignment(3, f, b));
  CHECK((s.marks[0] == Mark::background));
  CHECK((s.marks[2] == Mark::foreground));
  CHECK(s.x[1] == 0.5);
  CHECK(s.foreground() == std::vector<int>{2});
}

TEST_CASE("clusterFromLabels thresholds soft labels") {
  LabelAssignment la = makeAssignment(4, std::vector<int>{0}, std::vector<int>{3});
  la.x = {1.0, 0.5, 0.49, 0.0};
  const TrajectoryCluster c = clusterFromLabels(la, 0.5, 7);
  CHECK(c.members == std::vector<int>{0, 1});
  CHECK(c.sourceProposal == 7);
  la.x = {0.1, 0.1, 0.1, 0.1};
  CHECK_THROWS(clusterFromLabels(la, 0.5));
}

TEST_CASE("markFromProposal marks by rounded position at the proposal frame") {
  TrajectorySet ts;
  ts.frameCount = 3;
  ts.width = 10;
  ts.height = 10;
  ts.trajectories = {{0, 0, {{1.2, 1.4}, {2.0, 2.0}}},
                     {1, 1, {{7.0, 7.0}, {7.0, 7.0}}},
                     {2, 2, {{2.0, 2.0}}},
                     {3, 0, {{2.6, 1.0}, {2.6, 1.0}, {2.6, 1.0}}}};
  Proposal p;
  p.frameIndex = 1;
  p.mask = MaskFrame(10, 10, 0);
  p.mask(2, 2) = 1;
  p.mask(3, 1) = 1;
  const LabelAssignment la = markFromProposal(p, ts);
  CHECK(la.foreground() == std::vector<int>{0, 3});
  CHECK(la.background() == std::vector<int>{1});
  CHECK((la.marks[2] == Mark::unlabeled));
  CHECK(la.x[2] == 0.5);

  p.frameIndex = 1;
  p.mask = MaskFrame(10, 10, 1);
  const LabelAssignment all = markFromProposal(p, ts);
  CHECK(all.background().empty());
  CHECK(all.foreground().size() == 3);

  TrajectorySet none = ts;
  none.trajectories = {{0, 0, {{1.0, 1.0}}}};
  CHECK_THROWS(markFromProposal(p, none));
}

TEST_CASE("gt-mask proposal marks exactly the trajectories inside the object") {
  const SyntheticScene s = synthesize(moptube::testing::rectangleScene(2, 1));
  const TrajectorySet ts = linkTrajectories(s.flows, s.backwardFlows, {});
  Proposal p;
  p.frameIndex = 5;
  p.mask = s.gtTubes[0].masks[5 - s.gtTubes[0].first];
  const LabelAssignment la = markFromProposal(p, ts);
  std::vector<int> inside;
  for (const auto& tr : ts.trajectories) {
    if (!tr.aliveAt(5)) continue;
    const Point2 q = tr.at(5);
    const int x = static_cast<int>(std::lround(q.x)), y = static_cast<int>(std::lround(q.y));
    if (x >= 0 && y >= 0 && x < p.mask.width() && y < p.mask.height() && p.mask(x, y)) inside.push_back(tr.id);
  }
  CHECK(!inside.empty());
  CHECK(la.foreground() == inside);
}

TEST_CASE("spectral clustering separates two cliques exactly") {
  const SparseAffinity a = [] {
    std::vector<AffinityEntry> e;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) e.push_back({6 * c + i, 6 * c + j, 1.0});
    return SparseAffinity(12, std::move(e));
  }();
  const std::vector<int> ks = {2};
  const auto pools = spectralClusters(a, ks);
  REQUIRE(pools.size() == 1);
  REQUIRE(pools[0].size() == 2);
  std::vector<std::vector<int>> got = {pools[0][0].members, pools[0][1].members};
  std::sort(got.begin(), got.end());
  CHECK(got[0] == ids(0, 6));
  CHECK(got[1] == ids(6, 12));

  const std::vector<int> bad = {1};
  CHECK_THROWS(spectralClusters(a, bad));
  std::vector<std::string> warnings;
  const std::vector<int> big = {2, 20};
  const auto skipped = spectralClusters(a, big, {}, &warnings);
  CHECK(warnings.size() == 1);
  REQUIRE(skipped.size() == 2);
  CHECK(skipped[0].size() == 2);
  CHECK(skipped[1].empty());
}

TEST_CASE("bottom eigenvalues of the normalized Laplacian match a dense solve") {
  const auto g = randomLabeledGraph(42, 120, 1);
  const int n = g.affinity.n();
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
  const auto& d = g.affinity.degree();
  for (const auto& e : g.affinity.entries()) {
    const double v = e.w / std::sqrt(d[e.i] * d[e.j]);
    N(e.i, e.j) -= v;
    N(e.j, e.i) -= v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
  const SpectralEmbedding emb = bottomEigenvectors(g.affinity, 5, 9);
  CHECK(emb.converged);
  for (int k = 0; k < 5; ++k) CHECK(emb.values[k] == doctest::Approx(es.eigenvalues()(k)).epsilon(1e-6));
}

TEST_CASE("k-means is seeded and recovers separated blobs") {
  std::vector<double> pts;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) {
      pts.push_back(10.0 * c + 0.01 * i);
      pts.push_back(-5.0 * c);
    }
  const auto a = kmeans(pts, 30, 2, 3, 4, 10, 10);
  const auto b = kmeans(pts, 30, 2, 3, 4, 10, 10);
  CHECK(a == b);
  for (int c = 0; c < 3; ++c)
    for (int i = 1; i < 10; ++i) CHECK(a[10 * c + i] == a[10 * c]);
  CHECK(a[0] != a[10]);
  CHECK(a[10] != a[20]);
}

// With the default lambda the object/background weight is exp(-0.4); the
// normalized cut then prefers to split the static background spatially. A
// sharper kernel separates the three motions.
TEST_CASE("two-object scene: k=3 spectral clusters agree with gt labels at lambda=1") {
  const SyntheticScene s = synthesize(moptube::testing::twoObjectScene());
  const TrajectorySet ts = linkTrajectories(s.flows, s.backwardFlows, {});
  AffinityParams p;
  p.lambda = 1.0;
  const SparseAffinity a = buildAffinity(ts, p);
  const std::vector<int> ks = {3};
  const auto pools = spectralClusters(a, ks);
  REQUIRE(pools.size() == 1);
  std::vector<int> got(ts.n(), -1), gt(ts.n(), 2);
  for (std::size_t c = 0; c < pools[0].size(); ++c)
    for (int m : pools[0][c].members) got[m] = static_cast<int>(c);
  for (const auto& tr : ts.trajectories) {
    const Point2 q = tr.points[0];
    for (int k = 0; k < 2; ++k)
      if (s.gtTubes[k].masks[tr.startFrame - s.gtTubes[k].first](static_cast<int>(std::lround(q.x)),
                                                                      static_cast<int>(std::lround(q.y))))
        gt[tr.id] = k;
  }
  const double ri = moptube::testing::randIndex(got, gt);
  MESSAGE("Rand index " << ri);
  CHECK(ri >= 0.95);
}
