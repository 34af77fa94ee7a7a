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
#include <fstream>
#include <random>

#include <doctest.h>

#include "moptube/objectness.hpp"
#include "support.hpp"

using namespace moptube;

namespace {

FlowField constantFlow(int w, int h, float u, float v) {
  FlowField f(w, h);
  std::fill(f.u.begin(), f.u.end(), u);
  std::fill(f.v.begin(), f.v.end(), v);
  return f;
}

// Direct per-pixel loops: nearest-rank p95, box and ring means.
double centerSurroundOracle(const FlowField& f, const Box& b) {
  std::vector<double> m;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) m.push_back(std::hypot(double{f.u[y * f.width + x]}, double{f.v[y * f.width + x]}));
  std::vector<double> sorted = m;
  std::sort(sorted.begin(), sorted.end());
  double norm = sorted[static_cast<std::size_t>(std::ceil(0.95 * sorted.size())) - 1];
  if (norm <= 0.0) norm = sorted.back();
  if (norm <= 0.0) return 0.0;
  const int d = std::max(b.width(), b.height()) / 2;
  double in = 0.0, ring = 0.0;
  long long nIn = 0, nRing = 0;
  for (int y = std::max(0, b.y0 - d); y <= std::min(f.height - 1, b.y1 + d); ++y)
    for (int x = std::max(0, b.x0 - d); x <= std::min(f.width - 1, b.x1 + d); ++x) {
      if (b.contains(x, y)) {
        in += m[y * f.width + x];
        ++nIn;
      } else {
        ring += m[y * f.width + x];
        ++nRing;
      }
    }
  const double ci = std::clamp(in / nIn / norm, 0.0, 1.0);
  const double cr = nRing ? std::clamp(ring / nRing / norm, 0.0, 1.0) : 0.0;
  return ci - cr;
}

Tube boxTube(int w, int h, int first, int len, const Box& b, int id = 0) {
  Tube t;
  t.width = w;
  t.height = h;
  t.first = first;
  for (int k = 0; k < len; ++k) {
    MaskFrame m(w, h, 0);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) m(x, y) = 1;
    t.masks.push_back(m);
  }
  t.refreshBoxes();
  (void)id;
  return t;
}

class TableScorer : public BoxScorer {
 public:
  explicit TableScorer(std::vector<double> perFrame) : perFrame_(std::move(perFrame)) {}
  double score(int frame, const Box&) const override { return perFrame_.at(frame); }

 private:
  std::vector<double> perFrame_;
};

std::vector<int> order(const RankedList& r) {
  std::vector<int> ids;
  for (const auto& it : r.items) ids.push_back(it.id);
  return ids;
}

}  // namespace

TEST_CASE("center-surround examples") {
  CHECK(centerSurround(FlowField(20, 20), Box{2, 2, 8, 8}) == 0.0);

  FlowField f(40, 40);
  const Box b{10, 10, 19, 19};
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) f.u[y * 40 + x] = 1.0f;
  // 100 of 1600 pixels move: p95 is zero, so the maximum (1) normalizes.
  CHECK(centerSurround(f, b) == doctest::Approx(1.0));
  CHECK(centerSurround(constantFlow(10, 10, 1, 0), Box{0, 0, 9, 9}) == doctest::Approx(1.0));
  CHECK_THROWS(centerSurround(f, Box{}));
  CHECK_THROWS(centerSurround(f, Box{30, 30, 40, 35}));
}

TEST_CASE("center-surround equals a direct per-pixel evaluation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> val(-3.0f, 3.0f);
  for (int trial = 0; trial < 20; ++trial) {
    FlowField f(37, 29);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
      f.u[i] = val(rng);
      f.v[i] = val(rng);
    }
    std::uniform_int_distribution<int> px(0, 36), py(0, 28);
    int x0 = px(rng), x1 = px(rng), y0 = py(rng), y1 = py(rng);
    const Box b{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    CHECK(std::abs(centerSurround(f, b) - centerSurroundOracle(f, b)) <= 1e-12);
  }
}

TEST_CASE("gt box outscores random background boxes of the same size") {
  const SyntheticScene s = synthesize(moptube::testing::rectangleScene(2, 1));
  const FlowField& flow = s.flows[3];
  const Box gt = s.gtTubes[0].boxes[3];
  const double target = centerSurround(flow, gt);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> px(0, 64 - gt.width()), py(0, 48 - gt.height());
  int tested = 0;
  while (tested < 100) {
    const int x = px(rng), y = py(rng);
    const Box b{x, y, x + gt.width() - 1, y + gt.height() - 1};
    bool touches = false;
    for (int yy = b.y0; yy <= b.y1 && !touches; ++yy)
      for (int xx = b.x0; xx <= b.x1 && !touches; ++xx) touches = s.gtTubes[0].masks[3](xx, yy) != 0;
    if (touches) continue;
    ++tested;
    CHECK(centerSurround(flow, b) < target);
  }
}

TEST_CASE("tube scores add over the span") {
  const std::vector<FlowField> flows(6, constantFlow(20, 20, 1, 0));
  const CenterSurroundScorer cs(flows);
  Tube one = boxTube(20, 20, 2, 1, Box{3, 3, 9, 9});
  Tube two = boxTube(20, 20, 2, 2, Box{3, 3, 9, 9});
  const double s1 = scoreTube(one, cs);
  CHECK(s1 == doctest::Approx(cs.score(2, Box{3, 3, 9, 9})));
  CHECK(scoreTube(two, cs) == doctest::Approx(2.0 * s1));
  CHECK(two.score == doctest::Approx(2.0 * s1));
  CHECK(scoreTube(two, cs, Aggregation::mean) == doctest::Approx(s1));

  const TableScorer table({0.5, 1.0, -2.0, 4.0, 0.25});
  Tube a = boxTube(20, 20, 0, 2, Box{1, 1, 2, 2});
  Tube b = boxTube(20, 20, 2, 3, Box{1, 1, 2, 2});
  Tube ab = boxTube(20, 20, 0, 5, Box{1, 1, 2, 2});
  CHECK(scoreTube(ab, table) == doctest::Approx(scoreTube(a, table) + scoreTube(b, table)));
}

TEST_CASE("ranking: plain sort, ties and permutation") {
  std::vector<Tube> pool;
  for (int k = 0; k < 5; ++k) pool.push_back(boxTube(20, 20, k % 2, 2, Box{k, 0, k + 2 + (k == 3), 3}));
  pool[0].score = 1.0;
  pool[1].score = 3.0;
  pool[2].score = 3.0;
  pool[3].score = 3.0;
  pool[4].score = -1.0;
  const RankedList r = rankTubes(pool, {});
  // 2 starts at 0; 1 and 3 start at 1, 3 has the larger volume.
  CHECK(order(r) == std::vector<int>{2, 3, 1, 0, 4});
  CHECK(!r.diversified);

  pool[1] = pool[3];
  pool[1].score = 3.0;
  const RankedList same = rankTubes(pool, {});
  CHECK(order(same) == std::vector<int>{2, 1, 3, 0, 4});  // full tie: id decides
}

TEST_CASE("diversified ranking examples") {
  std::vector<Tube> pool;
  pool.push_back(boxTube(20, 20, 0, 3, Box{0, 0, 9, 9}));
  pool.push_back(boxTube(20, 20, 0, 3, Box{0, 0, 9, 9}));
  pool.push_back(boxTube(20, 20, 0, 3, Box{12, 12, 15, 15}));
  pool[0].score = 5.0;
  pool[1].score = 4.5;
  pool[2].score = 1.0;
  const RankedList suppressed = rankTubes(pool, {true, 1e9});
  CHECK(order(suppressed) == std::vector<int>{0, 2, 1});
  CHECK(suppressed.diversified);
  CHECK(order(rankTubes(pool, {true, 0.0})) == order(rankTubes(pool, {})));

  // IoU 0.9 between the first two; scores 5, 4, 3.
  std::vector<Tube> hand;
  hand.push_back(boxTube(20, 20, 0, 1, Box{0, 0, 9, 9}));
  hand.push_back(boxTube(20, 20, 0, 1, Box{0, 0, 8, 9}));
  hand.push_back(boxTube(20, 20, 0, 1, Box{12, 12, 15, 15}));
  REQUIRE(tubeIoU(hand[0], hand[1]) == doctest::Approx(0.9));
  hand[0].score = 5.0;
  hand[1].score = 4.0;
  hand[2].score = 3.0;
  const RankedList r = rankTubes(hand, {true, 1.0});
  CHECK(order(r) == std::vector<int>{0, 2, 1});
  CHECK(r.items[2].score == doctest::Approx(4.0 - 0.9 * 4.0));
}

TEST_CASE("non-diversified order is invariant to increasing score transforms") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Tube> pool;
  for (int k = 0; k < 30; ++k) {
    pool.push_back(boxTube(16, 16, k % 4, 1 + k % 3, Box{k % 8, k % 5, k % 8 + 3, k % 5 + 2}));
    pool.back().score = std::round(u(rng) * 4.0) / 4.0;  // with ties
  }
  const auto base = order(rankTubes(pool, {}));
  for (auto& t : pool) t.score = std::exp(3.0 * t.score) + 7.0;
  CHECK(order(rankTubes(pool, {})) == base);
  std::vector<int> sorted = base;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < 30; ++k) CHECK(sorted[k] == k);
}

TEST_CASE("filterProposals keeps the best per frame") {
  std::vector<FlowField> flows(2, FlowField(30, 30));
  for (int y = 10; y < 20; ++y)
    for (int x = 10; x < 20; ++x) flows[0].u[y * 30 + x] = flows[1].u[y * 30 + x] = 2.0f;
  const CenterSurroundScorer cs(flows);
  auto prop = [](int frame, const Box& b) {
    Proposal p;
    p.frameIndex = frame;
    p.mask = MaskFrame(30, 30, 0);
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) p.mask(x, y) = 1;
    p.box = b;
    return p;
  };
  const std::vector<Proposal> props = {prop(0, {0, 0, 5, 5}), prop(0, {10, 10, 19, 19}), prop(1, {22, 22, 28, 28}),
                                       prop(1, {10, 10, 19, 19}), prop(0, {24, 0, 29, 5})};
  std::vector<double> scores;
  const auto kept = filterProposals(props, cs, 1, &scores);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box == Box{10, 10, 19, 19});
  CHECK(kept[1].box == Box{10, 10, 19, 19});
  CHECK(scores[0] > 0.0);
  CHECK(cs.score(0, Box{0, 0, 5, 5}) <= 0.0);
  CHECK(filterProposals(props, cs, 10).size() == props.size());
  CHECK_THROWS(filterProposals(props, cs, 0));
}

TEST_CASE("two-object scene: both objects keep a good proposal at keepTop=8") {
  const SyntheticScene s = synthesize(moptube::testing::twoObjectScene());
  const CenterSurroundScorer cs(s.flows);
  std::vector<Proposal> all;
  for (std::size_t t = 0; t + 1 < s.frames.size(); ++t) {
    const auto p = generateProposals(motionBoundaries(s.flows[t], {}), {}, 17 + t, static_cast<int>(t));
    all.insert(all.end(), p.begin(), p.end());
  }
  const auto kept = filterProposals(all, cs, 8);
  for (int k = 0; k < 2; ++k) {
    double best = 0.0;
    for (const auto& p : kept) best = std::max(best, maskIoU(p.mask, s.gtTubes[k].masks[p.frameIndex]));
    CHECK(best >= 0.8);
  }
}

TEST_CASE("external scores load from JSON and must cover every box") {
  moptube::testing::TempDir dir("external");
  std::ofstream(dir / "s.json") << R"([{"frame": 0, "box": [1, 2, 3, 4], "score": 0.75},
                                       {"frame": 2, "box": [0, 0, 5, 5], "score": -1.5}])";
  const ExternalScorer ext = ExternalScorer::load(dir / "s.json");
  CHECK(ext.score(0, Box{1, 2, 3, 4}) == 0.75);
  CHECK(ext.score(2, Box{0, 0, 5, 5}) == -1.5);
  try {
    (void)ext.score(1, Box{1, 2, 3, 4});
    FAIL("expected a missing-score error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::data));
  }
  std::ofstream(dir / "bad.json") << R"([{"frame": 0, "box": [1, 2, 3], "score": 1}])";
  CHECK_THROWS(ExternalScorer::load(dir / "bad.json"));
  CHECK_THROWS(ExternalScorer::load(dir / "missing.json"));
}
