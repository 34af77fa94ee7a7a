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


// Exercises libmoptube through its C interface only.

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "moptube/moptube.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path = fs::temp_directory_path() / ("moptube_capi_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

mt_affinity* path3() {
  const int i[] = {0, 1};
  const int j[] = {1, 2};
  const double w[] = {1.0, 1.0};
  mt_affinity* a = nullptr;
  REQUIRE(mt_affinity_create(3, i, j, w, 2, &a) == MT_OK);
  return a;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::strlen(mt_version()) > 0);
  mt_config* cfg = nullptr;
  REQUIRE(mt_config_create(&cfg) == MT_OK);
  CHECK(mt_config_set(cfg, "bogus", "1") == MT_ERR_ARGUMENT);
  CHECK(std::string(mt_last_error()).find("bogus") != std::string::npos);
  CHECK(mt_config_set(cfg, nullptr, "1") == MT_ERR_ARGUMENT);
  CHECK(mt_config_create(nullptr) == MT_ERR_ARGUMENT);
  mt_config_destroy(cfg);
  mt_config_destroy(nullptr);
}

TEST_CASE("config through the C interface") {
  mt_config* cfg = nullptr;
  REQUIRE(mt_config_create(&cfg) == MT_OK);
  CHECK(mt_config_set(cfg, "lambda", "0.5") == MT_OK);
  char buf[64];
  size_t len = 0;
  CHECK(mt_config_get(cfg, "lambda", buf, sizeof buf, &len) == MT_OK);
  CHECK(std::string(buf) == "0.5");
  CHECK(len == 3);
  char tiny[2];
  CHECK(mt_config_get(cfg, "kList", tiny, sizeof tiny, &len) == MT_OK);
  CHECK(std::string(tiny) == "2");
  CHECK(len == std::strlen("2,3,4,5,6,8,10"));
  CHECK(mt_config_parse(cfg, "radius = 30\n# note\nwindow = 2\n") == MT_OK);
  CHECK(mt_config_get(cfg, "radius", buf, sizeof buf, nullptr) == MT_OK);
  CHECK(std::string(buf) == "30");
  CHECK(mt_config_validate(cfg) == MT_OK);
  CHECK(mt_config_set(cfg, "keepTop", "0") == MT_OK);
  CHECK(mt_config_validate(cfg) == MT_ERR_ARGUMENT);

  size_t textLen = 0;
  CHECK(mt_config_text(cfg, nullptr, 0, &textLen) == MT_OK);
  std::string text(textLen + 1, '\0');
  CHECK(mt_config_text(cfg, text.data(), text.size(), nullptr) == MT_OK);
  CHECK(text.find("radius = 30") != std::string::npos);
  CHECK(mt_config_key_count() > 30);
  CHECK(std::string(mt_config_key(0)) == "sigmaB");
  CHECK(mt_config_key(100000) == nullptr);
  mt_config_destroy(cfg);
}

TEST_CASE("flow fields round trip through .flo") {
  Scratch dir;
  std::vector<float> uv(4 * 3 * 2);
  for (size_t k = 0; k < uv.size(); ++k) uv[k] = static_cast<float>(k) * 0.25f - 1.0f;
  mt_flow* f = nullptr;
  REQUIRE(mt_flow_create(4, 3, uv.data(), &f) == MT_OK);
  CHECK(mt_flow_save(f, (dir / "f.flo").c_str()) == MT_OK);
  mt_flow* g = nullptr;
  REQUIRE(mt_flow_load((dir / "f.flo").c_str(), &g) == MT_OK);
  int w = 0, h = 0;
  CHECK(mt_flow_size(g, &w, &h) == MT_OK);
  CHECK(w == 4);
  CHECK(h == 3);
  std::vector<float> back(uv.size());
  CHECK(mt_flow_copy_uv(g, back.data(), back.size()) == MT_OK);
  CHECK(back == uv);
  CHECK(mt_flow_copy_uv(g, back.data(), 3) == MT_ERR_ARGUMENT);
  std::ofstream(dir / "bad.flo") << "nope nope nope";
  std::ofstream(dir / "short.flo") << "nope";
  mt_flow* bad = nullptr;
  CHECK(mt_flow_load((dir / "bad.flo").c_str(), &bad) == MT_ERR_FORMAT);
  CHECK(mt_flow_load((dir / "short.flo").c_str(), &bad) == MT_ERR_IO);
  CHECK(mt_flow_load((dir / "absent.flo").c_str(), &bad) == MT_ERR_IO);
  CHECK(mt_flow_create(0, 3, uv.data(), &bad) == MT_ERR_ARGUMENT);
  mt_flow_destroy(f);
  mt_flow_destroy(g);
}

TEST_CASE("random walk through the C interface") {
  mt_affinity* a = path3();
  int n = 0;
  size_t m = 0;
  CHECK(mt_affinity_size(a, &n, &m) == MT_OK);
  CHECK(n == 3);
  CHECK(m == 2);
  const uint8_t marks[] = {MT_FOREGROUND, MT_UNLABELED, MT_BACKGROUND};
  double x[3];
  int unreachable = -1;
  CHECK(mt_random_walk(a, marks, -1, x, &unreachable) == MT_OK);
  CHECK(x[0] == 1.0);
  CHECK(x[1] == doctest::Approx(0.5));
  CHECK(x[2] == 0.0);
  CHECK(unreachable == 0);
  CHECK(mt_random_walk(a, marks, 50, x, nullptr) == MT_OK);
  CHECK(x[1] == doctest::Approx(0.5).epsilon(1e-6));
  double q = 0.0;
  CHECK(mt_quadratic_form(a, x, &q) == MT_OK);
  CHECK(q == doctest::Approx(0.5));
  const uint8_t badMarks[] = {7, 0, 0};
  CHECK(mt_random_walk(a, badMarks, -1, x, nullptr) == MT_ERR_ARGUMENT);
  mt_affinity_destroy(a);

  const int i[] = {0};
  const int j[] = {0};
  const double w[] = {1.0};
  mt_affinity* loop = nullptr;
  CHECK(mt_affinity_create(2, i, j, w, 1, &loop) == MT_ERR_ARGUMENT);
}

TEST_CASE("stage chain through the C interface") {
  Scratch dir;
  std::ofstream(dir / "synth.json")
      << R"({"width": 64, "height": 48, "frames": 6,
             "objects": [{"x": 10, "y": 15, "width": 20, "height": 10, "vx": 2}]})";
  REQUIRE(mt_synth((dir / "synth.json").c_str(), 3, (dir / "scene").c_str()) == MT_OK);
  const std::string scene = dir / "scene/scene.json";
  mt_config* cfg = nullptr;
  REQUIRE(mt_config_create(&cfg) == MT_OK);
  REQUIRE(mt_config_set(cfg, "kList", "2,3") == MT_OK);

  CHECK(mt_stage_boundaries(cfg, scene.c_str(), (dir / "b").c_str()) == MT_OK);
  CHECK(mt_stage_mops(cfg, scene.c_str(), (dir / "b").c_str(), (dir / "p").c_str()) == MT_OK);
  CHECK(mt_stage_track(cfg, scene.c_str(), (dir / "t").c_str()) == MT_OK);
  CHECK(mt_stage_cluster(cfg, (dir / "t/trajectories.jsonl").c_str(), (dir / "p/proposals.json").c_str(),
                         (dir / "c").c_str()) == MT_OK);
  CHECK(mt_stage_tubes(cfg, scene.c_str(), (dir / "b").c_str(), (dir / "t/trajectories.jsonl").c_str(),
                       (dir / "c/clusters.json").c_str(), (dir / "v").c_str()) == MT_OK);
  CHECK(mt_stage_rank(cfg, scene.c_str(), (dir / "v/tubes.json").c_str(), (dir / "r").c_str()) == MT_OK);
  CHECK(mt_stage_eval(cfg, scene.c_str(), (dir / "r/ranked.json").c_str(), nullptr, (dir / "e").c_str()) ==
        MT_OK);
  CHECK(fs::exists(dir / "e/report.json"));
  CHECK(!fs::exists(dir / "e/proposal_report.json"));

  mt_affinity* a = nullptr;
  CHECK(mt_affinity_load((dir / "c/affinity.txt").c_str(), &a) == MT_OK);
  mt_affinity_destroy(a);

  double iou = 0.0;
  CHECK(mt_tube_iou((dir / "scene/gt/object_00").c_str(), (dir / "scene/gt/object_00").c_str(), &iou) == MT_OK);
  CHECK(iou == 1.0);
  CHECK(mt_tube_iou((dir / "scene/gt/object_00").c_str(), (dir / "nope").c_str(), &iou) == MT_ERR_IO);
  CHECK(mt_stage_rank(cfg, scene.c_str(), (dir / "missing.json").c_str(), (dir / "r2").c_str()) == MT_ERR_IO);
  CHECK(std::string(mt_last_error()).find("stage rank") != std::string::npos);
  CHECK(mt_synth("nonexistent", 1, (dir / "x").c_str()) == MT_ERR_ARGUMENT);
  mt_config_destroy(cfg);
}

TEST_CASE("full run through the C interface") {
  Scratch dir;
  REQUIRE(mt_synth("static", 1, (dir / "scene").c_str()) == MT_OK);
  mt_config* cfg = nullptr;
  REQUIRE(mt_config_create(&cfg) == MT_OK);
  REQUIRE(mt_config_set(cfg, "kList", "2") == MT_OK);
  mt_run_summary s{};
  REQUIRE(mt_run(cfg, (dir / "scene/scene.json").c_str(), (dir / "out").c_str(), &s) == MT_OK);
  CHECK(s.motion_proposals == 0);
  CHECK(s.tubes > 0);
  CHECK(s.evaluated == 1);
  CHECK(mt_warning_count() >= 1);
  CHECK(mt_warning(mt_warning_count()) == nullptr);
  size_t len = 0;
  CHECK(mt_manifest_scene((dir / "out/run.json").c_str(), nullptr, 0, &len) == MT_OK);
  CHECK(len > 0);
  mt_config* again = nullptr;
  REQUIRE(mt_config_create(&again) == MT_OK);
  CHECK(mt_config_load(again, (dir / "out/run.json").c_str()) == MT_OK);
  char buf[32];
  CHECK(mt_config_get(again, "kList", buf, sizeof buf, nullptr) == MT_OK);
  CHECK(std::string(buf) == "2");
  mt_config_destroy(again);
  mt_config_destroy(cfg);
}
