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

#ifndef MOPTUBE_VIDEOIO_HPP_
#define MOPTUBE_VIDEOIO_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "moptube/common.hpp"

namespace moptube {

namespace fs = std::filesystem;

// Intensities in [0,1], row-major, channels interleaved.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  // Luma for RGB frames, the value itself for grayscale.
  double gray(int x, int y) const;
  friend bool operator==(const Frame&, const Frame&) = default;
};

// Dense displacement field; stored as 32-bit floats to match .flo exactly.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  double magnitude(int x, int y) const {
    const double a = u[index(x, y)], b = v[index(x, y)];
    return std::sqrt(a * a + b * b);
  }
  friend bool operator==(const FlowField&, const FlowField&) = default;
};

// Spatio-temporal pixel volume over the contiguous span [first, last()].
struct Tube {
  int width = 0;
  int height = 0;
  int first = 0;
  std::vector<MaskFrame> masks;  // masks[k] is frame first + k
  std::vector<Box> boxes;        // tight box per in-span frame
  double score = 0.0;

  int last() const { return first + static_cast<int>(masks.size()) - 1; }
  int length() const { return static_cast<int>(masks.size()); }
  bool covers(int frame) const { return frame >= first && frame <= last(); }
  long long volume() const;
  // Recomputes boxes from masks.
  void refreshBoxes();
  friend bool operator==(const Tube&, const Tube&) = default;
};

enum class ShapeKind { rectangle, ellipse };

struct SynthObject {
  ShapeKind shape = ShapeKind::rectangle;
  double x = 0.0, y = 0.0;  // top-left of the bounding box at frame 0
  double width = 20.0, height = 10.0;
  double vx = 0.0, vy = 0.0;  // pixels per frame
  double intensity = 0.8;
};

struct SynthConfig {
  int width = 128;
  int height = 128;
  int frames = 10;
  double backgroundIntensity = 0.3;
  double bgVx = 0.0, bgVy = 0.0;
  double noise = 0.1;  // uniform texture amplitude
  std::uint64_t seed = 1;
  std::vector<SynthObject> objects;  // later objects occlude earlier ones
};

struct SyntheticScene {
  std::vector<Frame> frames;
  std::vector<FlowField> flows;          // frame t -> t+1
  std::vector<FlowField> backwardFlows;  // frame t+1 -> t, on frame t+1's grid
  std::vector<Tube> gtTubes;
  std::uint64_t seed = 0;
};

SyntheticScene synthesize(const SynthConfig& config);

// Middlebury .flo: "PIEH" tag (float 202021.25), int32 width, int32 height,
// then interleaved little-endian float32 (u,v) pairs row by row.
FlowField loadFlow(const fs::path& path);
void saveFlow(const FlowField& flow, const fs::path& path);

// Binary P5/P6; 8-bit values map to v/255.
Frame loadFrame(const fs::path& path);
void saveFrame(const Frame& frame, const fs::path& path);
// Binary mask as P5 with values {0,255}; any nonzero byte reads as set.
MaskFrame loadMask(const fs::path& path);
void saveMask(const MaskFrame& mask, const fs::path& path);
// 16-bit P5 (big-endian samples), used for label images.
Grid<std::uint16_t> loadLabels16(const fs::path& path);
void saveLabels16(const Grid<std::uint16_t>& labels, const fs::path& path);
// 8-bit quantization of a [0,1] map; lossy.
void saveUnitMap(const Grid<double>& map, const fs::path& path);
Grid<double> loadUnitMap(const fs::path& path);
void savePpm(const Frame& rgb, const fs::path& path);

// Tube container: directory with frame_NNNN.pgm per in-span frame plus
// tube.json {firstFrame, lastFrame, width, height, score}.
void saveTube(const Tube& tube, const fs::path& dir);
Tube loadTube(const fs::path& dir);

// Scene manifest (scene.json): dimensions plus relative paths of frames,
// forward flows, backward flows and ground-truth tube directories.
struct SceneFiles {
  int width = 0;
  int height = 0;
  std::vector<fs::path> frames;
  std::vector<fs::path> flows;
  std::vector<fs::path> backwardFlows;
  std::vector<fs::path> gt;
};

void saveScene(const SyntheticScene& scene, const fs::path& dir);
SceneFiles readSceneManifest(const fs::path& manifest);

struct LoadedScene {
  std::vector<Frame> frames;
  std::vector<FlowField> flows;
  std::vector<FlowField> backwardFlows;
  std::vector<Tube> gtTubes;
};
LoadedScene loadScene(const fs::path& manifest);

}  // namespace moptube

#endif  // MOPTUBE_VIDEOIO_HPP_
