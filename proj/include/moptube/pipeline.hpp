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

#ifndef MOPTUBE_PIPELINE_HPP_
#define MOPTUBE_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "moptube/affinity.hpp"
#include "moptube/boundaries.hpp"
#include "moptube/metrics.hpp"
#include "moptube/mops.hpp"
#include "moptube/objectness.hpp"
#include "moptube/randomwalk.hpp"
#include "moptube/trajectories.hpp"
#include "moptube/tubes.hpp"

namespace moptube {

// Every tunable of the pipeline. Text form is one `key = value` per line;
// `#` starts a comment; lists are comma separated.
struct PipelineConfig {
  // boundaries
  double sigmaB = 2.0;
  double sigmaImage = 0.1;
  bool thin = false;
  // proposals
  double eps = 0.001;
  int numSeeds = 64;
  double dedupThreshold = 0.95;
  int bgStride = 8;
  bool staticProposals = true;
  // trajectories
  int stride = 4;
  double thetaA = 0.5;
  double thetaR = 0.01;
  // affinities
  double radius = 60.0;
  double lambda = 0.1;
  int window = 3;
  int minOverlap = 3;
  double epsA = 1e-3;
  // propagation and clustering
  int iters = 50;
  double xThresh = 0.5;
  std::vector<int> kList = {2, 3, 4, 5, 6, 8, 10};
  // supervoxels and projection
  double thetaSp = 0.3;
  int minArea = 16;
  double thetaLink = 0.5;
  double thresh = 0.5;
  // objectness and ranking
  int keepTop = 6;
  double staticShare = 0.5;
  std::string scorer = "centerSurround";
  std::string scoreFile;
  std::string aggregation = "sum";
  bool diversify = true;
  double gamma = 1.0;
  // evaluation
  std::vector<int> atSizes = defaultPoolSizes();
  // run
  std::uint64_t seed = 1;
  int threads = 1;

  // Throws ErrorCode::config-style argument errors for unknown keys or
  // out-of-range values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;
  void parse(const std::string& text);
  void loadFile(const fs::path& path);
  // Every key in canonical order.
  std::string toText() const;
  static const std::vector<std::string>& keys();
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::argument, what) {}
};

// Named synthetic scenes: "single" (one 30x20 rectangle at (2,0) px/frame,
// 20 frames, 128x128), "two" (rectangles at (2,0) and (-2,0)), "static"
// (one rectangle at rest). A path ending in .json is read as a SynthConfig.
SynthConfig synthPreset(const std::string& name, std::uint64_t seed);
SynthConfig loadSynthConfig(const fs::path& path);

struct StageWarnings {
  std::vector<std::string> messages;
  void add(const std::string& m) { messages.push_back(m); }
};

struct RunSummary {
  int motionProposals = 0;
  int staticProposals = 0;
  int keptProposals = 0;
  int trajectories = 0;
  int affinityEntries = 0;
  int clusters = 0;
  int tubes = 0;
  bool evaluated = false;
  Aggregates aggregates;
  double topTubeIoU = 0.0;  // best gt IoU of the top-ranked tube
  std::vector<std::string> warnings;
};

void stageSynth(const SynthConfig& config, const fs::path& outDir);
void stageBoundaries(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir);
void stageMops(const PipelineConfig& cfg, const fs::path& scene, const fs::path& boundariesDir,
               const fs::path& outDir, StageWarnings& warnings);
void stageTrack(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir);
void stageCluster(const PipelineConfig& cfg, const fs::path& trajectories, const fs::path& proposalsIndex,
                  const fs::path& outDir, StageWarnings& warnings);
void stageTubes(const PipelineConfig& cfg, const fs::path& scene, const fs::path& boundariesDir,
                const fs::path& trajectories, const fs::path& clusters, const fs::path& outDir,
                StageWarnings& warnings);
void stageRank(const PipelineConfig& cfg, const fs::path& scene, const fs::path& tubesIndex,
               const fs::path& outDir);
// proposalsIndex may be empty; then only tube metrics are produced.
void stageEval(const PipelineConfig& cfg, const fs::path& scene, const fs::path& ranked,
               const fs::path& proposalsIndex, const fs::path& outDir);

// Blends tube pixels at 0.5 over the frame in red: out = 0.5 * frame + 0.5 * (1,0,0).
Frame overlayFrame(const Frame& frame, const MaskFrame* mask);
void stageOverlay(const fs::path& scene, const fs::path& tubeDir, const fs::path& outDir);

// Full chain with every intermediate written under outDir plus run.json.
RunSummary runPipeline(const PipelineConfig& cfg, const fs::path& scene, const fs::path& outDir);

}  // namespace moptube

#endif  // MOPTUBE_PIPELINE_HPP_
