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

#include "moptube/videoio.hpp"

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

namespace {

constexpr float kFloTag = 202021.25f;

std::uint32_t readLe32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void writeLe32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::ofstream openOut(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  return out;
}

std::string readAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Netpbm {
  char kind = 0;  // '5' or '6'
  int width = 0, height = 0, maxval = 0;
  std::size_t offset = 0;  // start of raster
};

Netpbm parseHeader(const std::string& bytes, const fs::path& path) {
  Netpbm h;
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    fail(ErrorCode::format, "not a binary PGM/PPM: " + path.string());
  h.kind = bytes[1];
  std::size_t pos = 2;
  int fields[3] = {0, 0, 0};
  for (int& field : fields) {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      fail(ErrorCode::format, "malformed Netpbm header: " + path.string());
    long long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1 << 24)) fail(ErrorCode::format, "Netpbm field too large: " + path.string());
      ++pos;
    }
    field = static_cast<int>(value);
  }
  if (pos >= bytes.size()) fail(ErrorCode::format, "truncated Netpbm header: " + path.string());
  ++pos;  // single whitespace before raster
  h.width = fields[0];
  h.height = fields[1];
  h.maxval = fields[2];
  h.offset = pos;
  if (h.maxval < 1 || h.maxval > 65535)
    fail(ErrorCode::format, "bad Netpbm maxval: " + path.string());
  const std::size_t channels = h.kind == '6' ? 3 : 1;
  const std::size_t sample = h.maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * channels * sample;
  if (bytes.size() - h.offset != need)
    fail(ErrorCode::format, "raster size does not match header: " + path.string());
  return h;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double noiseAt(std::uint64_t seed, std::uint64_t layer, long long x, long long y) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(layer));
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  return unitReal(h) * 2.0 - 1.0;
}

bool insideShape(const SynthObject& o, int frame, int x, int y) {
  const double ox = o.x + o.vx * frame, oy = o.y + o.vy * frame;
  const double px = x + 0.5, py = y + 0.5;
  if (o.shape == ShapeKind::rectangle)
    return px >= ox && px < ox + o.width && py >= oy && py < oy + o.height;
  const double rx = o.width / 2.0, ry = o.height / 2.0;
  const double dx = (px - (ox + rx)) / rx, dy = (py - (oy + ry)) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Owner index per pixel: -1 background, else the topmost object.
Grid<int> owners(const SynthConfig& c, int frame) {
  Grid<int> own(c.width, c.height, -1);
  for (std::size_t k = 0; k < c.objects.size(); ++k)
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x)
        if (insideShape(c.objects[k], frame, x, y)) own(x, y) = static_cast<int>(k);
  return own;
}

}  // namespace

double Frame::gray(int x, int y) const {
  if (channels == 1) return at(x, y);
  return 0.299 * at(x, y, 0) + 0.587 * at(x, y, 1) + 0.114 * at(x, y, 2);
}

long long Tube::volume() const {
  long long n = 0;
  for (const auto& m : masks) n += maskArea(m);
  return n;
}

void Tube::refreshBoxes() {
  boxes.clear();
  for (const auto& m : masks) boxes.push_back(boundingBox(m));
}

SyntheticScene synthesize(const SynthConfig& c) {
  if (c.width < 1 || c.height < 1) fail(ErrorCode::argument, "synthesize: empty canvas");
  if (c.frames < 2) fail(ErrorCode::argument, "synthesize: need at least 2 frames");
  if (c.noise < 0.0) fail(ErrorCode::argument, "synthesize: negative noise amplitude");
  for (const auto& o : c.objects)
    if (!(o.width > 0.0 && o.height > 0.0))
      fail(ErrorCode::argument, "synthesize: object with non-positive size");

  SyntheticScene scene;
  scene.seed = c.seed;
  std::vector<Grid<int>> own;
  own.reserve(c.frames);
  for (int t = 0; t < c.frames; ++t) own.push_back(owners(c, t));

  for (int t = 0; t < c.frames; ++t) {
    Frame f;
    f.width = c.width;
    f.height = c.height;
    f.channels = 1;
    f.data.resize(static_cast<std::size_t>(c.width) * c.height);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        const int k = own[t](x, y);
        double base, vx, vy;
        if (k < 0) {
          base = c.backgroundIntensity;
          vx = c.bgVx;
          vy = c.bgVy;
        } else {
          base = c.objects[k].intensity;
          vx = c.objects[k].vx;
          vy = c.objects[k].vy;
        }
        // Texture is attached to the surface, so it moves with the flow.
        const long long lx = std::llround(x - vx * t), ly = std::llround(y - vy * t);
        const double value = base + c.noise * noiseAt(c.seed, static_cast<std::uint64_t>(k + 1), lx, ly);
        f.data[own[t].index(x, y)] = static_cast<float>(quantize(value) / 255.0);
      }
    }
    scene.frames.push_back(std::move(f));
  }

  auto velocity = [&](int k) {
    return k < 0 ? std::pair{c.bgVx, c.bgVy} : std::pair{c.objects[k].vx, c.objects[k].vy};
  };
  for (int t = 0; t + 1 < c.frames; ++t) {
    FlowField fwd(c.width, c.height), bwd(c.width, c.height);
    for (std::size_t i = 0; i < fwd.u.size(); ++i) {
      const auto [fx, fy] = velocity(own[t][i]);
      fwd.u[i] = static_cast<float>(fx);
      fwd.v[i] = static_cast<float>(fy);
      const auto [bx, by] = velocity(own[t + 1][i]);
      bwd.u[i] = static_cast<float>(-bx);
      bwd.v[i] = static_cast<float>(-by);
    }
    scene.flows.push_back(std::move(fwd));
    scene.backwardFlows.push_back(std::move(bwd));
  }

  for (std::size_t k = 0; k < c.objects.size(); ++k) {
    Tube tube;
    tube.width = c.width;
    tube.height = c.height;
    tube.first = 0;
    for (int t = 0; t < c.frames; ++t) {
      MaskFrame m(c.width, c.height, 0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = own[t][i] == static_cast<int>(k) ? 1 : 0;
      if (maskArea(m) == 0)
        fail(ErrorCode::argument, "synthesize: object " + std::to_string(k) +
                                      " is not visible inside the canvas at frame " +
                                      std::to_string(t));
      tube.masks.push_back(std::move(m));
    }
    tube.refreshBoxes();
    scene.gtTubes.push_back(std::move(tube));
  }
  return scene;
}

FlowField loadFlow(const fs::path& path) {
  const std::string bytes = readAll(path);
  if (bytes.size() < 12) fail(ErrorCode::io, "truncated .flo header: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const float tag = std::bit_cast<float>(readLe32(p));
  if (tag != kFloTag) fail(ErrorCode::format, "bad .flo magic number: " + path.string());
  const auto w = static_cast<std::int32_t>(readLe32(p + 4));
  const auto h = static_cast<std::int32_t>(readLe32(p + 8));
  if (w < 1 || h < 1 || w > (1 << 16) || h > (1 << 16))
    fail(ErrorCode::format, "bad .flo dimensions: " + path.string());
  FlowField flow(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < 12 + n * 8) fail(ErrorCode::io, "truncated .flo payload: " + path.string());
  for (std::size_t i = 0; i < n; ++i) {
    flow.u[i] = std::bit_cast<float>(readLe32(p + 12 + i * 8));
    flow.v[i] = std::bit_cast<float>(readLe32(p + 16 + i * 8));
  }
  return flow;
}

void saveFlow(const FlowField& flow, const fs::path& path) {
  auto out = openOut(path);
  out.write("PIEH", 4);
  writeLe32(out, static_cast<std::uint32_t>(flow.width));
  writeLe32(out, static_cast<std::uint32_t>(flow.height));
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    writeLe32(out, std::bit_cast<std::uint32_t>(flow.u[i]));
    writeLe32(out, std::bit_cast<std::uint32_t>(flow.v[i]));
  }
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

Frame loadFrame(const fs::path& path) {
  const std::string bytes = readAll(path);
  const Netpbm h = parseHeader(bytes, path);
  if (h.maxval != 255) fail(ErrorCode::format, "frames must be 8-bit: " + path.string());
  Frame f;
  f.width = h.width;
  f.height = h.height;
  f.channels = h.kind == '6' ? 3 : 1;
  f.data.resize(bytes.size() - h.offset);
  for (std::size_t i = 0; i < f.data.size(); ++i)
    f.data[i] = static_cast<float>(static_cast<unsigned char>(bytes[h.offset + i]) / 255.0);
  return f;
}

void saveFrame(const Frame& f, const fs::path& path) {
  if (f.channels != 1 && f.channels != 3) fail(ErrorCode::argument, "frame must have 1 or 3 channels");
  if (f.data.size() != static_cast<std::size_t>(f.width) * f.height * f.channels)
    fail(ErrorCode::argument, "frame data does not match its dimensions");
  auto out = openOut(path);
  out << (f.channels == 3 ? "P6\n" : "P5\n") << f.width << ' ' << f.height << "\n255\n";
  std::string raster(f.data.size(), '\0');
  for (std::size_t i = 0; i < f.data.size(); ++i) raster[i] = static_cast<char>(quantize(f.data[i]));
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

void savePpm(const Frame& rgb, const fs::path& path) {
  if (rgb.channels != 3) fail(ErrorCode::argument, "savePpm expects an RGB frame");
  saveFrame(rgb, path);
}

MaskFrame loadMask(const fs::path& path) {
  const std::string bytes = readAll(path);
  const Netpbm h = parseHeader(bytes, path);
  if (h.kind != '5' || h.maxval > 255) fail(ErrorCode::format, "mask must be 8-bit P5: " + path.string());
  MaskFrame m(h.width, h.height, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = bytes[h.offset + i] != 0 ? 1 : 0;
  return m;
}

void saveMask(const MaskFrame& mask, const fs::path& path) {
  auto out = openOut(path);
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::string raster(mask.size(), '\0');
  for (std::size_t i = 0; i < mask.size(); ++i) raster[i] = mask[i] ? static_cast<char>(255) : '\0';
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

Grid<std::uint16_t> loadLabels16(const fs::path& path) {
  const std::string bytes = readAll(path);
  const Netpbm h = parseHeader(bytes, path);
  if (h.kind != '5' || h.maxval <= 255) fail(ErrorCode::format, "labels must be 16-bit P5: " + path.string());
  Grid<std::uint16_t> g(h.width, h.height, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto hi = static_cast<unsigned char>(bytes[h.offset + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[h.offset + 2 * i + 1]);
    g[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return g;
}

void saveLabels16(const Grid<std::uint16_t>& labels, const fs::path& path) {
  auto out = openOut(path);
  out << "P5\n" << labels.width() << ' ' << labels.height() << "\n65535\n";
  std::string raster(labels.size() * 2, '\0');
  for (std::size_t i = 0; i < labels.size(); ++i) {
    raster[2 * i] = static_cast<char>(labels[i] >> 8);
    raster[2 * i + 1] = static_cast<char>(labels[i] & 0xff);
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

void saveUnitMap(const Grid<double>& map, const fs::path& path) {
  Frame f;
  f.width = map.width();
  f.height = map.height();
  f.channels = 1;
  f.data.assign(map.data().begin(), map.data().end());
  saveFrame(f, path);
}

Grid<double> loadUnitMap(const fs::path& path) {
  const Frame f = loadFrame(path);
  if (f.channels != 1) fail(ErrorCode::format, "unit map must be grayscale: " + path.string());
  Grid<double> g(f.width, f.height, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = f.data[i];
  return g;
}

namespace {

std::string frameName(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.pgm", t);
  return buf;
}

}  // namespace

void saveTube(const Tube& tube, const fs::path& dir) {
  if (tube.masks.empty()) fail(ErrorCode::argument, "saveTube: empty tube");
  fs::create_directories(dir);
  for (int k = 0; k < tube.length(); ++k) saveMask(tube.masks[k], dir / frameName(tube.first + k));
  json j = {{"firstFrame", tube.first},
            {"lastFrame", tube.last()},
            {"width", tube.width},
            {"height", tube.height},
            {"score", tube.score}};
  auto out = openOut(dir / "tube.json");
  out << j.dump(2) << '\n';
}

Tube loadTube(const fs::path& dir) {
  json j;
  try {
    j = json::parse(readAll(dir / "tube.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad tube manifest " + (dir / "tube.json").string() + ": " + e.what());
  }
  Tube tube;
  try {
    tube.first = j.at("firstFrame").get<int>();
    const int last = j.at("lastFrame").get<int>();
    tube.width = j.at("width").get<int>();
    tube.height = j.at("height").get<int>();
    tube.score = j.value("score", 0.0);
    if (last < tube.first) fail(ErrorCode::format, "tube span is empty: " + dir.string());
    for (int t = tube.first; t <= last; ++t) {
      MaskFrame m = loadMask(dir / frameName(t));
      if (m.width() != tube.width || m.height() != tube.height)
        fail(ErrorCode::format, "tube mask dimensions differ from manifest: " + dir.string());
      tube.masks.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad tube manifest " + dir.string() + ": " + e.what());
  }
  tube.refreshBoxes();
  return tube;
}

void saveScene(const SyntheticScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  const Frame& f0 = scene.frames.at(0);
  j["width"] = f0.width;
  j["height"] = f0.height;
  j["frameCount"] = scene.frames.size();
  j["seed"] = scene.seed;
  j["frames"] = json::array();
  j["flows"] = json::array();
  j["backwardFlows"] = json::array();
  j["gt"] = json::array();
  char buf[64];
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    std::snprintf(buf, sizeof buf, "frames/frame_%04zu.pgm", t);
    saveFrame(scene.frames[t], dir / buf);
    j["frames"].push_back(buf);
  }
  for (std::size_t t = 0; t < scene.flows.size(); ++t) {
    std::snprintf(buf, sizeof buf, "flow/forward_%04zu.flo", t);
    saveFlow(scene.flows[t], dir / buf);
    j["flows"].push_back(buf);
    std::snprintf(buf, sizeof buf, "flow/backward_%04zu.flo", t);
    saveFlow(scene.backwardFlows[t], dir / buf);
    j["backwardFlows"].push_back(buf);
  }
  for (std::size_t k = 0; k < scene.gtTubes.size(); ++k) {
    std::snprintf(buf, sizeof buf, "gt/object_%02zu", k);
    saveTube(scene.gtTubes[k], dir / buf);
    j["gt"].push_back(buf);
  }
  auto out = openOut(dir / "scene.json");
  out << j.dump(2) << '\n';
}

SceneFiles readSceneManifest(const fs::path& manifest) {
  SceneFiles s;
  const fs::path base = manifest.parent_path();
  try {
    const json j = json::parse(readAll(manifest));
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    for (const auto& p : j.at("frames")) s.frames.push_back(base / p.get<std::string>());
    for (const auto& p : j.at("flows")) s.flows.push_back(base / p.get<std::string>());
    if (j.contains("backwardFlows"))
      for (const auto& p : j.at("backwardFlows")) s.backwardFlows.push_back(base / p.get<std::string>());
    if (j.contains("gt"))
      for (const auto& p : j.at("gt")) s.gt.push_back(base / p.get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad scene manifest " + manifest.string() + ": " + e.what());
  }
  if (s.frames.size() < 2) fail(ErrorCode::data, "scene needs at least 2 frames: " + manifest.string());
  if (s.flows.size() + 1 != s.frames.size())
    fail(ErrorCode::data, "scene needs frames-1 forward flows: " + manifest.string());
  if (!s.backwardFlows.empty() && s.backwardFlows.size() != s.flows.size())
    fail(ErrorCode::data, "backward flow count differs from forward: " + manifest.string());
  return s;
}

LoadedScene loadScene(const fs::path& manifest) {
  const SceneFiles files = readSceneManifest(manifest);
  LoadedScene s;
  auto check = [&](int w, int h, const fs::path& p) {
    if (w != files.width || h != files.height)
      fail(ErrorCode::data, "dimensions differ from scene manifest: " + p.string());
  };
  for (const auto& p : files.frames) {
    s.frames.push_back(loadFrame(p));
    check(s.frames.back().width, s.frames.back().height, p);
  }
  for (const auto& p : files.flows) {
    s.flows.push_back(loadFlow(p));
    check(s.flows.back().width, s.flows.back().height, p);
  }
  for (const auto& p : files.backwardFlows) {
    s.backwardFlows.push_back(loadFlow(p));
    check(s.backwardFlows.back().width, s.backwardFlows.back().height, p);
  }
  for (const auto& p : files.gt) {
    s.gtTubes.push_back(loadTube(p));
    check(s.gtTubes.back().width, s.gtTubes.back().height, p);
  }
  return s;
}

}  // namespace moptube
