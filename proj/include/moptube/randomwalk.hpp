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

#ifndef MOPTUBE_RANDOMWALK_HPP_
#define MOPTUBE_RANDOMWALK_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moptube/affinity.hpp"
#include "moptube/mops.hpp"

namespace moptube {

enum class Mark : std::uint8_t { unlabeled = 0, foreground = 1, background = 2 };

// Soft trajectory labels with clamped foreground (x = 1) and background
// (x = 0) sets.
struct LabelAssignment {
  std::vector<double> x;
  std::vector<Mark> marks;
  // Set by solveExact when some component had no marked node; those nodes
  // get x = 0.
  bool unreachable = false;

  std::size_t n() const { return x.size(); }
  std::vector<int> foreground() const;
  std::vector<int> background() const;
};

// Unlabeled nodes start at 0.5. Throws if fg and bg intersect.
LabelAssignment makeAssignment(int n, std::span<const int> fg, std::span<const int> bg);

// Foreground/background swap: marks exchanged, x -> 1 - x.
LabelAssignment swapLabels(const LabelAssignment& la);

// Trajectories alive at the proposal's frame are foreground when their
// rounded position lies in the mask, background otherwise.
LabelAssignment markFromProposal(const Proposal& p, const TrajectorySet& ts);

struct SolveParams {
  double tolerance = 1e-14;  // CG stop: |r| <= tolerance * |b|
  int maxIterations = 0;     // 0 = 20 n
};

// Minimizes x^T L x with marked nodes clamped: L_U x_U = -L_UM x_M, by
// Jacobi-preconditioned conjugate gradients.
LabelAssignment solveExact(const SparseAffinity& a, const LabelAssignment& la,
                           const SolveParams& params = {});

// x <- Diag(A 1)^-1 A x with marked nodes re-clamped after every step.
// Zero-degree nodes keep their value.
LabelAssignment diffuse(const SparseAffinity& a, const LabelAssignment& la, int iters = 50);

struct TrajectoryCluster {
  std::vector<int> members;  // ascending trajectory ids
  std::optional<int> sourceProposal;
  std::vector<double> softLabels;
};

// members = {i : x_i >= xThresh}; throws when empty.
TrajectoryCluster clusterFromLabels(const LabelAssignment& la, double xThresh,
                                    std::optional<int> sourceProposal = std::nullopt);

struct SpectralEmbedding {
  int n = 0;
  int k = 0;
  std::vector<double> values;  // ascending eigenvalues of the normalized Laplacian
  std::vector<double> vectors; // n x k, row-major
  bool converged = true;
};

// Bottom-k eigenpairs of D^-1/2 L D^-1/2 (isolated nodes get a unit
// diagonal). Dense for small n, restarted block Krylov otherwise.
SpectralEmbedding bottomEigenvectors(const SparseAffinity& a, int k, std::uint64_t seed,
                                     double tolerance = 1e-8);

struct SpectralParams {
  std::uint64_t seed = 0;
  int restarts = 100;
  int iterations = 10;
  double tolerance = 1e-8;
  int maxEigenvectors = 50;
};

// Seeded k-means (k-means++ init, best inertia over restarts).
std::vector<int> kmeans(const std::vector<double>& points, int n, int dim, int k,
                        std::uint64_t seed, int restarts, int iterations);

// One clustering per k, aligned with kList; each non-empty group becomes a
// cluster. k > n leaves an empty slot and a warning; k < 2 or
// k > maxEigenvectors throws.
std::vector<std::vector<TrajectoryCluster>> spectralClusters(const SparseAffinity& a,
                                                             std::span<const int> kList,
                                                             const SpectralParams& params = {},
                                                             std::vector<std::string>* warnings = nullptr);

}  // namespace moptube

#endif  // MOPTUBE_RANDOMWALK_HPP_
