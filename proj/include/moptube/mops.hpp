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

#ifndef MOPTUBE_MOPS_HPP_
#define MOPTUBE_MOPS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moptube/boundaries.hpp"

namespace moptube {

enum class ProposalSource { motion, static_ };

std::string toString(ProposalSource s);
ProposalSource proposalSourceFromString(const std::string& s);

// Per-frame figure-ground segment.
struct Proposal {
  MaskFrame mask;
  int frameIndex = 0;
  ProposalSource source = ProposalSource::motion;
  Box box;  // tight box of mask
};

struct SeedSet {
  std::vector<Pixel> fgSeeds;
  std::vector<Pixel> bgSeeds;
};

struct ProposalParams {
  int numSeeds = 64;
  double eps = 0.001;
  double dedupThreshold = 0.95;
  int bgStride = 8;
};

// Multi-source 4-connected geodesic distance. The step between neighbours
// p and q costs eps + (strength(p) + strength(q)) / 2.
std::vector<double> geodesicDistance(const BoundaryMap& boundary, std::span<const Pixel> seeds,
                                     double eps);

// Foreground where the fg-seed distance is strictly below the bg-seed
// distance; ties go to background.
MaskFrame figureGround(const BoundaryMap& boundary, const SeedSet& seeds, double eps);

// Border pixels every `stride` px, corners included.
std::vector<Pixel> borderSeeds(int width, int height, int stride);

// Jittered-grid foreground seeds, deterministic in `seed`.
std::vector<Pixel> gridSeeds(int width, int height, int count, std::uint64_t seed);

// One figure-ground segmentation per foreground seed against the fixed
// border background. Empty masks are dropped, and any proposal whose IoU
// with an earlier survivor reaches dedupThreshold is discarded.
std::vector<Proposal> generateProposals(const BoundaryMap& boundary, const ProposalParams& params,
                                        std::uint64_t seed, int frameIndex = 0,
                                        ProposalSource source = ProposalSource::motion);

}  // namespace moptube

#endif  // MOPTUBE_MOPS_HPP_
