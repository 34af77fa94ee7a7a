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

#ifndef MOPTUBE_AFFINITY_HPP_
#define MOPTUBE_AFFINITY_HPP_

#include <span>
#include <vector>

#include "moptube/trajectories.hpp"

namespace moptube {

struct AffinityEntry {
  int i = 0;
  int j = 0;
  double w = 0.0;
  friend bool operator==(const AffinityEntry&, const AffinityEntry&) = default;
};

// Symmetric sparse weights stored once per unordered pair (i < j), plus a
// both-directions adjacency for solvers.
class SparseAffinity {
 public:
  SparseAffinity() = default;
  // Validates i != j, indices in range, weight in (0,1], no duplicate pairs.
  // Pairs given as (j, i) are reordered.
  SparseAffinity(int n, std::vector<AffinityEntry> entries);

  int n() const { return n_; }
  const std::vector<AffinityEntry>& entries() const { return entries_; }
  const std::vector<double>& degree() const { return degree_; }

  // Adjacency of node i: neighbour ids and weights, ascending by id.
  std::span<const int> neighbors(int i) const {
    return {cols_.data() + rowStart_[i], cols_.data() + rowStart_[i + 1]};
  }
  std::span<const double> weights(int i) const {
    return {vals_.data() + rowStart_[i], vals_.data() + rowStart_[i + 1]};
  }
  // A_ij, zero when not stored (including i == j).
  double weight(int i, int j) const;

 private:
  int n_ = 0;
  std::vector<AffinityEntry> entries_;
  std::vector<double> degree_;
  std::vector<std::size_t> rowStart_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

// L = Diag(A 1) - A, never materialized.
class Laplacian {
 public:
  explicit Laplacian(const SparseAffinity& affinity) : a_(&affinity) {}
  const SparseAffinity& affinity() const { return *a_; }
  std::vector<double> apply(std::span<const double> x) const;

 private:
  const SparseAffinity* a_;
};

struct AffinityParams {
  double radius = 60.0;    // max of the min spatial distance over common frames
  double lambda = 0.1;     // A = exp(-lambda d^2)
  int window = 3;          // velocity averaging window in frames
  int minOverlap = 3;      // common frames required
  double epsA = 1e-3;      // weights below this are dropped
};

// Mean velocity over [t, min(t + window, end)].
Point2 windowedVelocity(const Trajectory& tr, int t, int window);

// max over common frames of |v_a(t) - v_b(t)|^2; negative when the two
// trajectories share fewer than two frames.
double maxVelocityDifference2(const Trajectory& a, const Trajectory& b, int window);

SparseAffinity buildAffinity(const TrajectorySet& ts, const AffinityParams& params, int threads = 1);

// (1/2) sum_ij A_ij (x_i - x_j)^2 == x^T L x.
double quadraticForm(const Laplacian& laplacian, std::span<const double> x);

// Text triplets: header "n m", then m lines "i j w".
void saveAffinity(const SparseAffinity& a, const fs::path& path);
SparseAffinity loadAffinity(const fs::path& path);

}  // namespace moptube

#endif  // MOPTUBE_AFFINITY_HPP_
