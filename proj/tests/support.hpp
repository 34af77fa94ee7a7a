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


// Shared fixtures for the unit tests.

#ifndef MOPTUBE_TESTS_SUPPORT_HPP_
#define MOPTUBE_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "moptube/videoio.hpp"

namespace moptube::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() /
              ("moptube_" + name + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline SynthConfig rectangleScene(double vx, double vy, int frames = 10) {
  SynthConfig c;
  c.width = 64;
  c.height = 48;
  c.frames = frames;
  SynthObject o;
  o.x = 10;
  o.y = 15;
  o.width = 20;
  o.height = 10;
  o.vx = vx;
  o.vy = vy;
  c.objects = {o};
  return c;
}

inline SynthConfig twoObjectScene(int frames = 10) {
  SynthConfig c;
  c.width = 96;
  c.height = 64;
  c.frames = frames;
  SynthObject a;
  a.x = 8;
  a.y = 8;
  a.width = 24;
  a.height = 14;
  a.vx = 2;
  SynthObject b = a;
  b.x = 60;
  b.y = 38;
  b.vx = -2;
  b.intensity = 0.6;
  c.objects = {a, b};
  return c;
}

inline MaskFrame randomMask(int w, int h, std::uint64_t seed, double density = 0.5) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(density);
  MaskFrame m(w, h, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = bit(rng) ? 1 : 0;
  return m;
}

}  // namespace moptube::testing

#endif  // MOPTUBE_TESTS_SUPPORT_HPP_
