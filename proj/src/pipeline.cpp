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

#include "moptube/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace moptube {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parseDouble(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  return out;
}

long long parseInt(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size())
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  return out;
}

int parseInt32(const std::string& key, const std::string& v) {
  const long long x = parseInt(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError("config key '" + key + "': out of range: " + v);
  return static_cast<int>(x);
}

bool parseBool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<int> parseIntList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parseInt32(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string formatDouble(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string formatList(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct KeyBinding {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <class M>
KeyBinding doubleKey(M member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parseDouble(k, v); },
          [member](const PipelineConfig& c) { return formatDouble(c.*member); }};
}

template <class M>
KeyBinding intKey(M member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parseInt32(k, v); },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

template <class M>
KeyBinding boolKey(M member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parseBool(k, v); },
          [member](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <class M>
KeyBinding listKey(M member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parseIntList(k, v); },
          [member](const PipelineConfig& c) { return formatList(c.*member); }};
}

template <class M>
KeyBinding stringKey(M member) {
  return {[member](PipelineConfig& c, const std::string&, const std::string& v) { c.*member = trim(v); },
          [member](const PipelineConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, KeyBinding>>& bindings() {
  using C = PipelineConfig;
  static const std::vector<std::pair<std::string, KeyBinding>> table = {
      {"sigmaB", doubleKey(&C::sigmaB)},
      {"sigmaImage", doubleKey(&C::sigmaImage)},
      {"thin", boolKey(&C::thin)},
      {"eps", doubleKey(&C::eps)},
      {"numSeeds", intKey(&C::numSeeds)},
      {"dedupThreshold", doubleKey(&C::dedupThreshold)},
      {"bgStride", intKey(&C::bgStride)},
      {"staticProposals", boolKey(&C::staticProposals)},
      {"stride", intKey(&C::stride)},
      {"thetaA", doubleKey(&C::thetaA)},
      {"thetaR", doubleKey(&C::thetaR)},
      {"radius", doubleKey(&C::radius)},
      {"lambda", doubleKey(&C::lambda)},
      {"window", intKey(&C::window)},
      {"minOverlap", intKey(&C::minOverlap)},
      {"epsA", doubleKey(&C::epsA)},
      {"iters", intKey(&C::iters)},
      {"xThresh", doubleKey(&C::xThresh)},
      {"kList", listKey(&C::kList)},
      {"thetaSp", doubleKey(&C::thetaSp)},
      {"minArea", intKey(&C::minArea)},
      {"thetaLink", doubleKey(&C::thetaLink)},
      {"thresh", doubleKey(&C::thresh)},
      {"keepTop", intKey(&C::keepTop)},
      {"staticShare", doubleKey(&C::staticShare)},
      {"scorer", stringKey(&C::scorer)},
      {"scoreFile", stringKey(&C::scoreFile)},
      {"aggregation", stringKey(&C::aggregation)},
      {"diversify", boolKey(&C::diversify)},
      {"gamma", doubleKey(&C::gamma)},
      {"atSizes", listKey(&C::atSizes)},
      {"seed",
       {[](C& c, const std::string& k, const std::string& v) {
          const std::string t = trim(v);
          std::uint64_t out = 0;
          const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
          if (t.empty() || ec != std::errc() || p != t.data() + t.size())
            throw ConfigError("config key '" + k + "': not an unsigned integer: '" + v + "'");
          c.seed = out;
        },
        [](const C& c) { return std::to_string(c.seed); }}},
      {"threads", intKey(&C::threads)},
  };
  return table;
}

const KeyBinding& binding(const std::string& key) {
  for (const auto& [k, b] : bindings())
    if (k == key) return b;
  throw ConfigError("unknown config key: '" + key + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

// --- stage plumbing -------------------------------------------------------

// Re-throws with the stage name and input. Argument errors raised inside a
// stage are stage failures; file and data problems keep their category.
template <class Fn>
auto inStage(const std::string& stage, const std::string& input, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    const ErrorCode code = e.code() == ErrorCode::argument ? ErrorCode::stage : e.code();
    throw Error(code, "stage " + stage + " [" + input + "]: " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::stage, "stage " + stage + " [" + input + "]: " + e.what());
  }
}

fs::path absoluteNormal(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

std::string relativeTo(const fs::path& target, const fs::path& baseDir) {
  return absoluteNormal(target).lexically_relative(absoluteNormal(baseDir)).generic_string();
}

json readJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad JSON in " + path.string() + ": " + e.what());
  }
}

void writeJson(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

std::string numbered(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

// Flow describing each frame's motion: the forward flow leaving it, or for
// the last frame the backward flow entering it (forward otherwise).
std::vector<FlowField> perFrameFlows(const LoadedScene& s) {
  if (s.flows.empty()) fail(ErrorCode::data, "scene has no flow fields");
  if (s.flows.size() + 1 != s.frames.size())
    fail(ErrorCode::data, "scene needs frames - 1 forward flows");
  std::vector<FlowField> out = s.flows;
  out.push_back(s.backwardFlows.size() == s.flows.size() ? s.backwardFlows.back() : s.flows.back());
  return out;
}

bool allZero(const BoundaryMap& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return v == 0.0; });
}

std::unique_ptr<BoxScorer> makeScorer(const PipelineConfig& cfg, const std::vector<FlowField>& frameFlows) {
  if (cfg.scorer == "external") return std::make_unique<ExternalScorer>(ExternalScorer::load(cfg.scoreFile));
  return std::make_unique<CenterSurroundScorer>(frameFlows);
}

struct BoundarySet {
  std::vector<BoundaryMap> motion;
  std::vector<BoundaryMap> image;
};

BoundarySet loadBoundaries(const fs::path& dir) {
  const json j = readJson(dir / "boundaries.json");
  BoundarySet b;
  try {
    for (const auto& p : j.at("motion")) b.motion.push_back(loadUnitMap(dir / p.get<std::string>()));
    for (const auto& p : j.at("image")) b.image.push_back(loadUnitMap(dir / p.get<std::string>()));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad boundaries.json: " + std::string(e.what()));
  }
  if (b.motion.size() != b.image.size()) fail(ErrorCode::format, "boundaries.json: motion/image count mismatch");
  return b;
}

void checkBoundaries(const BoundarySet& b, const LoadedScene& s) {
  if (b.motion.size() != s.frames.size()) fail(ErrorCode::data, "boundary count does not match the scene");
  const int w = s.frames.at(0).width, h = s.frames.at(0).height;
  for (std::size_t t = 0; t < b.motion.size(); ++t)
    if (b.motion[t].width() != w || b.motion[t].height() != h || b.image[t].width() != w ||
        b.image[t].height() != h)
      fail(ErrorCode::data, "boundary map size does not match the scene at frame " + std::to_string(t));
}

struct IndexedProposal {
  int id = 0;
  Proposal proposal;
  double score = 0.0;
  bool kept = false;
};

std::vector<IndexedProposal> loadProposals(const fs::path& index) {
  const json j = readJson(index);
  const fs::path base = index.parent_path();
  std::vector<IndexedProposal> out;
  try {
    for (const auto& e : j.at("proposals")) {
      IndexedProposal p;
      p.id = e.at("id").get<int>();
      p.proposal.frameIndex = e.at("frameIndex").get<int>();
      p.proposal.source = proposalSourceFromString(e.at("source").get<std::string>());
      p.proposal.mask = loadMask(base / e.at("maskPath").get<std::string>());
      p.proposal.box = boundingBox(p.proposal.mask);
      p.score = e.at("score").get<double>();
      p.kept = e.at("kept").get<bool>();
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad proposal index " + index.string() + ": " + e.what());
  }
  return out;
}

std::vector<TrajectoryCluster> loadClusters(const fs::path& path) {
  const json j = readJson(path);
  std::vector<TrajectoryCluster> out;
  try {
    for (const auto& e : j) {
      TrajectoryCluster c;
      c.members = e.get<std::vector<int>>();
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad cluster file " + path.string() + ": " + e.what());
  }
  return out;
}

std::vector<Tube> loadTubeList(const fs::path& index, const char* key, std::vector<std::string>* paths) {
  const json j = readJson(index);
  const fs::path base = index.parent_path();
  std::vector<Tube> out;
  try {
    for (const auto& e : key ? j.at(key) : j) {
      const std::string p = e.at("tubePath").get<std::string>();
      out.push_back(loadTube(base / p));
      if (paths) paths->push_back(relativeTo(base / p, base));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad tube index " + index.string() + ": " + e.what());
  }
  return out;
}

}  // namespace

// --- config ---------------------------------------------------------------

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& [key, b] : bindings()) v.push_back(key);
    return v;
  }();
  return k;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  binding(trim(key)).set(*this, trim(key), value);
}

std::string PipelineConfig::get(const std::string& key) const { return binding(key).get(*this); }

void PipelineConfig::validate() const {
  require(sigmaB > 0.0, "sigmaB must be > 0");
  require(sigmaImage > 0.0, "sigmaImage must be > 0");
  require(eps > 0.0, "eps must be > 0");
  require(numSeeds >= 1, "numSeeds must be >= 1");
  require(dedupThreshold >= 0.0 && dedupThreshold <= 1.0, "dedupThreshold must be in [0,1]");
  require(bgStride >= 1, "bgStride must be >= 1");
  require(stride >= 1, "stride must be >= 1");
  require(thetaA >= 0.0 && thetaR >= 0.0, "thetaA and thetaR must be >= 0");
  require(radius > 0.0, "radius must be > 0");
  require(lambda > 0.0, "lambda must be > 0");
  require(window >= 1, "window must be >= 1");
  require(minOverlap >= 2, "minOverlap must be >= 2");
  require(epsA >= 0.0 && epsA < 1.0, "epsA must be in [0,1)");
  require(iters >= 0, "iters must be >= 0");
  require(xThresh > 0.0 && xThresh <= 1.0, "xThresh must be in (0,1]");
  for (int k : kList) require(k >= 2 && k <= 50, "kList entries must be in [2,50]");
  require(thetaSp >= 0.0 && thetaSp <= 1.0, "thetaSp must be in [0,1]");
  require(minArea >= 1, "minArea must be >= 1");
  require(thetaLink >= 0.0 && thetaLink <= 1.0, "thetaLink must be in [0,1]");
  require(thresh >= 0.0 && thresh <= 1.0, "thresh must be in [0,1]");
  require(keepTop >= 1, "keepTop must be >= 1");
  require(staticShare >= 0.0 && staticShare <= 1.0, "staticShare must be in [0,1]");
  require(scorer == "centerSurround" || scorer == "external", "scorer must be centerSurround or external");
  require(scorer != "external" || !scoreFile.empty(), "scorer=external needs scoreFile");
  require(aggregation == "sum" || aggregation == "mean", "aggregation must be sum or mean");
  require(gamma >= 0.0, "gamma must be >= 0");
  for (int s : atSizes) require(s >= 1, "atSizes entries must be >= 1");
  require(threads >= 0, "threads must be >= 0");
}

void PipelineConfig::parse(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(ss, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineNo) + ": expected key = value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void PipelineConfig::loadFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    // A run manifest: its resolved config object.
    json j;
    try {
      j = json::parse(ss.str());
    } catch (const json::exception& e) {
      throw ConfigError("bad run manifest " + path.string() + ": " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object())
      throw ConfigError("run manifest has no config object: " + path.string());
    for (const auto& [k, v] : j["config"].items())
      set(k, v.is_string() ? v.get<std::string>() : v.dump());
    return;
  }
  parse(ss.str());
}

std::string PipelineConfig::toText() const {
  std::string s;
  for (const auto& [k, b] : bindings()) s += k + " = " + b.get(*this) + "\n";
  return s;
}

// --- synthetic presets ----------------------------------------------------

SynthConfig synthPreset(const std::string& name, std::uint64_t seed) {
  SynthConfig c;
  c.width = 128;
  c.height = 128;
  c.frames = 20;
  c.seed = seed;
  SynthObject a;
  a.shape = ShapeKind::rectangle;
  a.width = 30;
  a.height = 20;
  if (name == "single") {
    a.x = 20;
    a.y = 54;
    a.vx = 2;
    c.objects = {a};
  } else if (name == "two") {
    a.x = 10;
    a.y = 24;
    a.vx = 2;
    SynthObject b = a;
    b.x = 88;
    b.y = 80;
    b.vx = -2;
    b.intensity = 0.6;
    c.objects = {a, b};
  } else if (name == "static") {
    a.x = 49;
    a.y = 54;
    c.objects = {a};
  } else {
    fail(ErrorCode::argument, "unknown synthetic preset: " + name);
  }
  return c;
}

SynthConfig loadSynthConfig(const fs::path& path) {
  const json j = readJson(path);
  SynthConfig c;
  try {
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.frames = j.value("frames", c.frames);
    c.backgroundIntensity = j.value("backgroundIntensity", c.backgroundIntensity);
    c.bgVx = j.value("bgVx", c.bgVx);
    c.bgVy = j.value("bgVy", c.bgVy);
    c.noise = j.value("noise", c.noise);
    c.seed = j.value("seed", c.seed);
    for (const auto& o : j.at("objects")) {
      SynthObject s;
      const std::string shape = o.value("shape", std::string("rectangle"));
      if (shape == "rectangle") s.shape = ShapeKind::rectangle;
      else if (shape == "ellipse") s.shape = ShapeKind::ellipse;
      else fail(ErrorCode::format, "unknown shape: " + shape);
      s.x = o.at("x").get<double>();
      s.y = o.at("y").get<double>();
      s.width = o.value("width", s.width);
      s.height = o.value("height", s.height);
      s.vx = o.value("vx", s.vx);
      s.vy = o.value("vy", s.vy);
      s.intensity = o.value("intensity", s.intensity);
      c.objects.push_back(s);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "bad synthetic config " + path.string() + ": " + e.what());
  }
  return c;
}

// --- stages ---------------------------------------------------------------

void stageSynth(const SynthConfig& config, const fs::path& outDir) {
  inStage("synth", outDir.string(), [&] { saveScene(synthesize(config), outDir); });
}

void stageBoundaries(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir) {
  inStage("boundaries", scene.string(), [&] {
    const LoadedScene s = loadScene(scene);
    const auto flows = perFrameFlows(s);
    const BoundaryParams motionParams{cfg.sigmaB, cfg.thin};
    const BoundaryParams imageParams{cfg.sigmaImage, cfg.thin};
    std::vector<BoundaryMap> motion(s.frames.size()), image(s.frames.size());
    parallelFor(s.frames.size(), cfg.threads, [&](std::size_t t) {
      motion[t] = motionBoundaries(flows[t], motionParams);
      image[t] = imageBoundaries(s.frames[t], imageParams);
    });
    json j;
    j["frameCount"] = s.frames.size();
    j["motion"] = json::array();
    j["image"] = json::array();
    fs::create_directories(outDir);
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      const std::string m = numbered("motion_%04zu.pgm", t), i = numbered("image_%04zu.pgm", t);
      saveUnitMap(motion[t], outDir / m);
      saveUnitMap(image[t], outDir / i);
      j["motion"].push_back(m);
      j["image"].push_back(i);
    }
    writeJson(j, outDir / "boundaries.json");
  });
}

void stageMops(const PipelineConfig& cfg, const fs::path& scene, const fs::path& boundariesDir,
               const fs::path& outDir, StageWarnings& warnings) {
  inStage("mops", boundariesDir.string(), [&] {
    const LoadedScene s = loadScene(scene);
    const auto flows = perFrameFlows(s);
    const BoundarySet b = loadBoundaries(boundariesDir);
    checkBoundaries(b, s);
    const ProposalParams pp{cfg.numSeeds, cfg.eps, cfg.dedupThreshold, cfg.bgStride};
    const std::size_t T = s.frames.size();

    std::vector<std::vector<Proposal>> motionPool(T), staticPool(T);
    std::vector<char> noMotion(T, 0);
    parallelFor(T, cfg.threads, [&](std::size_t t) {
      const int frame = static_cast<int>(t);
      const std::uint64_t base = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(t)));
      if (allZero(b.motion[t]))
        noMotion[t] = 1;
      else
        motionPool[t] = generateProposals(b.motion[t], pp, splitmix64(base), frame, ProposalSource::motion);
      if (cfg.staticProposals)
        staticPool[t] = generateProposals(b.image[t], pp, splitmix64(base + 1), frame, ProposalSource::static_);
    });
    const auto silent = static_cast<std::size_t>(std::count(noMotion.begin(), noMotion.end(), 1));
    if (silent == T)
      warnings.add("no motion boundaries in any frame; motion proposal pool is empty");
    else if (silent > 0)
      warnings.add(std::to_string(silent) + " frame(s) without motion boundaries produced no motion proposals");

    // Per-frame quotas: the static pool gets floor(keepTop * staticShare)
    // slots, motion the rest; a short pool hands its slots to the other.
    const auto scorer = makeScorer(cfg, flows);
    std::vector<IndexedProposal> all;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> ms, ss;
      for (const auto& p : motionPool[t]) ms.push_back(scorer->score(p.frameIndex, p.box));
      for (const auto& p : staticPool[t]) ss.push_back(scorer->score(p.frameIndex, p.box));
      int staticQuota = static_cast<int>(std::floor(cfg.keepTop * cfg.staticShare));
      int motionQuota = cfg.keepTop - staticQuota;
      const int nm = static_cast<int>(motionPool[t].size()), ns = static_cast<int>(staticPool[t].size());
      if (nm < motionQuota) staticQuota += motionQuota - nm;
      if (ns < staticQuota) motionQuota += staticQuota - ns;
      auto keepMask = [](const std::vector<double>& sc, int quota) {
        std::vector<std::size_t> order(sc.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return sc[a] > sc[c]; });
        std::vector<char> keep(sc.size(), 0);
        for (std::size_t k = 0; k < order.size() && static_cast<int>(k) < quota; ++k) keep[order[k]] = 1;
        return keep;
      };
      const auto km = keepMask(ms, motionQuota), ks = keepMask(ss, staticQuota);
      for (std::size_t i = 0; i < motionPool[t].size(); ++i)
        all.push_back({static_cast<int>(all.size()), motionPool[t][i], ms[i], km[i] != 0});
      for (std::size_t i = 0; i < staticPool[t].size(); ++i)
        all.push_back({static_cast<int>(all.size()), staticPool[t][i], ss[i], ks[i] != 0});
    }

    json j;
    j["width"] = s.frames.front().width;
    j["height"] = s.frames.front().height;
    j["frameCount"] = T;
    j["proposals"] = json::array();
    for (const auto& p : all) {
      // Each proposal is a one-frame tube container.
      Tube t;
      t.width = p.proposal.mask.width();
      t.height = p.proposal.mask.height();
      t.first = p.proposal.frameIndex;
      t.masks = {p.proposal.mask};
      t.score = p.score;
      const std::string dir = numbered("proposal_%05zu", static_cast<std::size_t>(p.id));
      saveTube(t, outDir / dir);
      const std::string mp = dir + numbered("/frame_%04zu.pgm", static_cast<std::size_t>(t.first));
      const Box& bx = p.proposal.box;
      j["proposals"].push_back({{"id", p.id},
                                {"frameIndex", p.proposal.frameIndex},
                                {"source", toString(p.proposal.source)},
                                {"box", {bx.x0, bx.y0, bx.x1, bx.y1}},
                                {"score", p.score},
                                {"kept", p.kept},
                                {"maskPath", mp},
                                {"tubePath", dir}});
    }
    writeJson(j, outDir / "proposals.json");
  });
}

void stageTrack(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir) {
  inStage("track", scene.string(), [&] {
    const LoadedScene s = loadScene(scene);
    if (s.backwardFlows.size() != s.flows.size())
      fail(ErrorCode::data, "backward flow files are required for tracking");
    const TrajectorySet ts = linkTrajectories(s.flows, s.backwardFlows, {cfg.stride, cfg.thetaA, cfg.thetaR});
    fs::create_directories(outDir);
    saveTrajectories(ts, outDir / "trajectories.jsonl");
  });
}

void stageCluster(const PipelineConfig& cfg, const fs::path& trajectories, const fs::path& proposalsIndex,
                  const fs::path& outDir, StageWarnings& warnings) {
  inStage("cluster", trajectories.string(), [&] {
    const TrajectorySet ts = loadTrajectories(trajectories);
    const auto proposals = loadProposals(proposalsIndex);
    const SparseAffinity a =
        buildAffinity(ts, {cfg.radius, cfg.lambda, cfg.window, cfg.minOverlap, cfg.epsA}, cfg.threads);
    fs::create_directories(outDir);
    saveAffinity(a, outDir / "affinity.txt");

    std::vector<const IndexedProposal*> kept;
    for (const auto& p : proposals)
      if (p.kept) kept.push_back(&p);
    std::vector<std::optional<TrajectoryCluster>> fromProposals(kept.size());
    std::vector<std::string> skipped(kept.size());
    parallelFor(kept.size(), cfg.threads, [&](std::size_t i) {
      try {
        const LabelAssignment seeded = markFromProposal(kept[i]->proposal, ts);
        if (seeded.foreground().empty()) {
          skipped[i] = "no trajectory inside the mask";
          return;
        }
        const LabelAssignment x = diffuse(a, seeded, cfg.iters);
        fromProposals[i] = clusterFromLabels(x, cfg.xThresh, kept[i]->id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::data && e.code() != ErrorCode::argument) throw;
        skipped[i] = e.what();
      }
    });
    int skippedCount = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) skippedCount += skipped[i].empty() ? 0 : 1;
    if (skippedCount > 0)
      warnings.add(std::to_string(skippedCount) + " proposal(s) could not seed a trajectory cluster");

    std::vector<std::string> spectralWarnings;
    std::vector<std::vector<TrajectoryCluster>> spectral;
    if (a.n() >= 2) {
      SpectralParams sp;
      sp.seed = cfg.seed;
      spectral = spectralClusters(a, cfg.kList, sp, &spectralWarnings);
    } else {
      warnings.add("fewer than two trajectories; spectral clustering skipped");
    }
    for (const auto& w : spectralWarnings) warnings.add(w);

    // Pool union without repeated member sets; the first occurrence wins.
    json pools = json::array();
    json index = json::array();
    json soft = json::array();
    std::set<std::vector<int>> seen;
    auto emit = [&](const TrajectoryCluster& c, const std::string& origin, int k) {
      if (!seen.insert(c.members).second) return;
      json e = {{"id", pools.size()}, {"origin", origin}, {"size", c.members.size()}};
      if (c.sourceProposal) e["sourceProposal"] = *c.sourceProposal;
      if (k > 0) e["k"] = k;
      pools.push_back(c.members);
      index.push_back(std::move(e));
    };
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (!fromProposals[i]) continue;
      soft.push_back({{"proposalId", kept[i]->id}, {"x", fromProposals[i]->softLabels}});
      emit(*fromProposals[i], "proposal", 0);
    }
    std::size_t ki = 0;
    for (int k : cfg.kList) {
      if (k > a.n()) continue;
      if (ki >= spectral.size()) break;
      for (const auto& c : spectral[ki]) emit(c, "spectral", k);
      ++ki;
    }
    writeJson(soft, outDir / "soft_labels.json");
    writeJson(pools, outDir / "clusters.json");
    writeJson(index, outDir / "cluster_index.json");
  });
}

void stageTubes(const PipelineConfig& cfg, const fs::path& scene, const fs::path& boundariesDir,
                const fs::path& trajectories, const fs::path& clusters, const fs::path& outDir,
                StageWarnings& warnings) {
  inStage("tubes", clusters.string(), [&] {
    const LoadedScene s = loadScene(scene);
    const BoundarySet b = loadBoundaries(boundariesDir);
    checkBoundaries(b, s);
    const TrajectorySet ts = loadTrajectories(trajectories);
    if (ts.width != s.frames[0].width || ts.height != s.frames[0].height ||
        ts.frameCount != static_cast<int>(s.frames.size()))
      fail(ErrorCode::data, "trajectories do not match the scene");
    const auto cs = loadClusters(clusters);

    const SuperpixelParams spp{cfg.thetaSp, cfg.minArea};
    std::vector<Partition> parts(s.frames.size());
    std::vector<char> fallback(s.frames.size(), 0);
    parallelFor(s.frames.size(), cfg.threads, [&](std::size_t t) {
      // Motion boundaries delimit moving objects; still frames fall back to
      // appearance.
      fallback[t] = allZero(b.motion[t]) ? 1 : 0;
      parts[t] = superpixels(fallback[t] ? b.image[t] : b.motion[t], spp);
    });
    const auto fb = std::count(fallback.begin(), fallback.end(), 1);
    if (fb > 0) warnings.add(std::to_string(fb) + " frame(s) used image boundaries for superpixels");
    const SupervoxelSet svs = buildSupervoxels(std::move(parts), s.flows, cfg.thetaLink);
    saveSupervoxels(svs, outDir / "supervoxels");

    std::vector<std::optional<Projection>> proj(cs.size());
    parallelFor(cs.size(), cfg.threads, [&](std::size_t i) {
      try {
        proj[i] = projectCluster(cs[i], ts, svs, cfg.thresh);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::data) throw;
      }
    });
    json j;
    j["tubes"] = json::array();
    std::set<std::vector<int>> seen;
    int empty = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (!proj[i]) {
        ++empty;
        continue;
      }
      if (!seen.insert(proj[i]->selected).second) continue;
      const std::size_t id = j["tubes"].size();
      const std::string dir = numbered("tubes/tube_%04zu", id);
      saveTube(proj[i]->tube, outDir / dir);
      j["tubes"].push_back({{"id", id},
                            {"cluster", i},
                            {"tubePath", dir},
                            {"firstFrame", proj[i]->tube.first},
                            {"lastFrame", proj[i]->tube.last()},
                            {"volume", proj[i]->tube.volume()}});
    }
    if (empty > 0) warnings.add(std::to_string(empty) + " cluster(s) projected to an empty tube");
    if (j["tubes"].empty()) fail(ErrorCode::data, "no cluster produced a tube");
    writeJson(j, outDir / "tubes.json");
  });
}

void stageRank(const PipelineConfig& cfg, const fs::path& scene, const fs::path& tubesIndex,
               const fs::path& outDir) {
  inStage("rank", tubesIndex.string(), [&] {
    const LoadedScene s = loadScene(scene);
    std::vector<std::string> paths;
    std::vector<Tube> pool = loadTubeList(tubesIndex, "tubes", &paths);
    const auto flows = perFrameFlows(s);
    const auto scorer = makeScorer(cfg, flows);
    const RankedList ranked = rank(pool, *scorer, {cfg.diversify, cfg.gamma},
                                   cfg.aggregation == "mean" ? Aggregation::mean : Aggregation::sum);
    json j = json::array();
    for (std::size_t r = 0; r < ranked.items.size(); ++r) {
      const auto& it = ranked.items[r];
      j.push_back({{"rank", r + 1},
                             {"tubeId", it.id},
                             {"tubePath", relativeTo(tubesIndex.parent_path() / paths[it.id], outDir)},
                             {"score", it.score},
                             {"rawScore", pool[it.id].score},
                             {"diversified", ranked.diversified}});
    }
    writeJson(j, outDir / "ranked.json");
  });
}

void stageEval(const PipelineConfig& cfg, const fs::path& scene, const fs::path& ranked,
               const fs::path& proposalsIndex, const fs::path& outDir) {
  inStage("eval", ranked.string(), [&] {
    const LoadedScene s = loadScene(scene);
    if (s.gtTubes.empty()) fail(ErrorCode::data, "scene has no ground truth");
    const std::vector<Tube> pool = loadTubeList(ranked, nullptr, nullptr);
    const EvalReport report = evaluate(pool, s.gtTubes, cfg.atSizes);
    saveReport(report, outDir / "report.json");
    saveCurveCsv(report, outDir / "curve.csv");
    if (!proposalsIndex.empty()) {
      std::vector<Proposal> kept;
      for (auto& p : loadProposals(proposalsIndex))
        if (p.kept) kept.push_back(std::move(p.proposal));
      saveReport(evaluatePerFrame(kept, s.gtTubes), outDir / "proposal_report.json");
    }
  });
}

Frame overlayFrame(const Frame& frame, const MaskFrame* mask) {
  if (mask && (mask->width() != frame.width || mask->height() != frame.height))
    fail(ErrorCode::argument, "overlay: mask and frame sizes differ");
  Frame out;
  out.width = frame.width;
  out.height = frame.height;
  out.channels = 3;
  out.data.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);
  const float tint[3] = {1.0f, 0.0f, 0.0f};
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const bool on = mask && (*mask)(x, y);
      for (int c = 0; c < 3; ++c) {
        const float v = frame.at(x, y, frame.channels == 3 ? c : 0);
        out.data[(static_cast<std::size_t>(y) * frame.width + x) * 3 + c] = on ? 0.5f * v + 0.5f * tint[c] : v;
      }
    }
  return out;
}

void stageOverlay(const fs::path& scene, const fs::path& tubeDir, const fs::path& outDir) {
  inStage("overlay", tubeDir.string(), [&] {
    const SceneFiles files = readSceneManifest(scene);
    const Tube tube = loadTube(tubeDir);
    if (tube.first < 0 || tube.last() >= static_cast<int>(files.frames.size()))
      fail(ErrorCode::data, "tube span exceeds the frame sequence");
    fs::create_directories(outDir);
    for (std::size_t t = 0; t < files.frames.size(); ++t) {
      const Frame f = loadFrame(files.frames[t]);
      const int ti = static_cast<int>(t);
      const MaskFrame* m = tube.covers(ti) ? &tube.masks[ti - tube.first] : nullptr;
      savePpm(overlayFrame(f, m), outDir / numbered("overlay_%04zu.ppm", t));
    }
  });
}

RunSummary runPipeline(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir) {
  cfg.validate();
  const SceneFiles files = inStage("load", scene.string(), [&] { return readSceneManifest(scene); });
  StageWarnings warnings;
  const fs::path bdir = outDir / "boundaries", pdir = outDir / "proposals", tdir = outDir / "trajectories",
                 cdir = outDir / "clusters", vdir = outDir / "tubes", rdir = outDir / "ranking",
                 edir = outDir / "eval";
  stageBoundaries(cfg, scene, bdir);
  stageMops(cfg, scene, bdir, pdir, warnings);
  stageTrack(cfg, scene, tdir);
  stageCluster(cfg, tdir / "trajectories.jsonl", pdir / "proposals.json", cdir, warnings);
  stageTubes(cfg, scene, bdir, tdir / "trajectories.jsonl", cdir / "clusters.json", vdir, warnings);
  stageRank(cfg, scene, vdir / "tubes.json", rdir);

  RunSummary sum;
  const json props = readJson(pdir / "proposals.json");
  for (const auto& p : props["proposals"]) {
    (p["source"] == "motion" ? sum.motionProposals : sum.staticProposals) += 1;
    sum.keptProposals += p["kept"].get<bool>() ? 1 : 0;
  }
  const SparseAffinity a = loadAffinity(cdir / "affinity.txt");
  sum.affinityEntries = static_cast<int>(a.entries().size());
  sum.trajectories = a.n();
  sum.clusters = static_cast<int>(readJson(cdir / "clusters.json").size());
  sum.tubes = static_cast<int>(readJson(vdir / "tubes.json")["tubes"].size());
  if (sum.motionProposals == 0 && !std::any_of(warnings.messages.begin(), warnings.messages.end(), [](const auto& m) {
        return m.find("motion proposal pool is empty") != std::string::npos;
      }))
    warnings.add("motion proposal pool is empty");

  json outputs = {{"boundaries", "boundaries/boundaries.json"},
                  {"proposals", "proposals/proposals.json"},
                  {"trajectories", "trajectories/trajectories.jsonl"},
                  {"affinity", "clusters/affinity.txt"},
                  {"softLabels", "clusters/soft_labels.json"},
                  {"clusters", "clusters/clusters.json"},
                  {"clusterIndex", "clusters/cluster_index.json"},
                  {"supervoxels", "tubes/supervoxels/supervoxels.json"},
                  {"tubes", "tubes/tubes.json"},
                  {"ranked", "ranking/ranked.json"}};
  if (!files.gt.empty()) {
    stageEval(cfg, scene, rdir / "ranked.json", pdir / "proposals.json", edir);
    const json rep = readJson(edir / "report.json");
    sum.evaluated = true;
    const auto& ag = rep["aggregates"];
    sum.aggregates = {ag["averageBestOverlap"].get<double>(), ag["coverage"].get<double>(),
                      ag["det50"].get<double>(), ag["det70"].get<double>()};
    outputs["report"] = "eval/report.json";
    outputs["curve"] = "eval/curve.csv";
    outputs["proposalReport"] = "eval/proposal_report.json";
    const LoadedScene s = loadScene(scene);
    const json rk = readJson(rdir / "ranked.json");
    const Tube top = loadTube(rdir / rk[0]["tubePath"].get<std::string>());
    for (const auto& g : s.gtTubes) sum.topTubeIoU = std::max(sum.topTubeIoU, tubeIoU(top, g));
  }
  sum.warnings = warnings.messages;

  json config = json::object();
  for (const auto& k : PipelineConfig::keys()) config[k] = cfg.get(k);
  json manifest = {{"config", config},
                   {"scene", absoluteNormal(scene).generic_string()},
                   {"frameCount", files.frames.size()},
                   {"counts",
                    {{"motionProposals", sum.motionProposals},
                     {"staticProposals", sum.staticProposals},
                     {"keptProposals", sum.keptProposals},
                     {"trajectories", sum.trajectories},
                     {"affinityEntries", sum.affinityEntries},
                     {"clusters", sum.clusters},
                     {"tubes", sum.tubes}}},
                   {"warnings", sum.warnings},
                   {"outputs", outputs}};
  {
    std::ofstream cfgOut(outDir / "config.txt", std::ios::binary);
    if (!cfgOut) fail(ErrorCode::io, "cannot write " + (outDir / "config.txt").string());
    cfgOut << cfg.toText();
  }
  writeJson(manifest, outDir / "run.json");
  return sum;
}

}  // namespace moptube
