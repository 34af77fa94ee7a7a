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

#include "moptube/randomwalk.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace moptube {

namespace {

// Solvers run on centered labels y = x - 1/2 so that swapping foreground
// and background negates every intermediate exactly; results are snapped
// to a 2^-48 grid where 1 - x is exact.
constexpr double kGrid = 0x1.0p48;

double toLabel(double centered) {
  const double q = std::nearbyint(centered * kGrid);
  return (0x1.0p47 + q) / kGrid;
}

double centeredMark(Mark m) { return m == Mark::foreground ? 0.5 : -0.5; }

struct Components {
  std::vector<int> id;
  int count = 0;
};

Components components(const SparseAffinity& a) {
  Components c;
  c.id.assign(a.n(), -1);
  std::vector<int> stack;
  for (int s = 0; s < a.n(); ++s) {
    if (c.id[s] >= 0) continue;
    c.id[s] = c.count;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : a.neighbors(u))
        if (c.id[v] < 0) {
          c.id[v] = c.count;
          stack.push_back(v);
        }
    }
    ++c.count;
  }
  return c;
}

void checkShape(const SparseAffinity& a, const LabelAssignment& la) {
  if (la.x.size() != static_cast<std::size_t>(a.n()) || la.marks.size() != la.x.size())
    fail(ErrorCode::argument, "label assignment size does not match affinity");
}

}  // namespace

std::vector<int> LabelAssignment::foreground() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i] == Mark::foreground) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> LabelAssignment::background() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i] == Mark::background) out.push_back(static_cast<int>(i));
  return out;
}

LabelAssignment makeAssignment(int n, std::span<const int> fg, std::span<const int> bg) {
  if (n < 0) fail(ErrorCode::argument, "makeAssignment: negative size");
  LabelAssignment la;
  la.x.assign(n, 0.5);
  la.marks.assign(n, Mark::unlabeled);
  for (int i : fg) {
    if (i < 0 || i >= n) fail(ErrorCode::argument, "makeAssignment: fg id out of range");
    la.marks[i] = Mark::foreground;
    la.x[i] = 1.0;
  }
  for (int i : bg) {
    if (i < 0 || i >= n) fail(ErrorCode::argument, "makeAssignment: bg id out of range");
    if (la.marks[i] == Mark::foreground) fail(ErrorCode::argument, "makeAssignment: F and B intersect");
    la.marks[i] = Mark::background;
    la.x[i] = 0.0;
  }
  return la;
}

LabelAssignment swapLabels(const LabelAssignment& la) {
  LabelAssignment out = la;
  for (std::size_t i = 0; i < out.n(); ++i) {
    out.x[i] = 1.0 - la.x[i];
    if (la.marks[i] == Mark::foreground) out.marks[i] = Mark::background;
    else if (la.marks[i] == Mark::background) out.marks[i] = Mark::foreground;
  }
  return out;
}

LabelAssignment markFromProposal(const Proposal& p, const TrajectorySet& ts) {
  if (p.frameIndex < 0 || p.frameIndex >= ts.frameCount)
    fail(ErrorCode::argument, "markFromProposal: frame index outside the video");
  if (p.mask.width() != ts.width || p.mask.height() != ts.height)
    fail(ErrorCode::argument, "markFromProposal: mask dimensions differ from trajectories");
  const int n = static_cast<int>(ts.n());
  std::vector<int> fg, bg;
  for (const auto& tr : ts.trajectories) {
    if (!tr.aliveAt(p.frameIndex)) continue;
    const Point2& q = tr.at(p.frameIndex);
    const int x = std::clamp(static_cast<int>(std::lround(q.x)), 0, ts.width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(q.y)), 0, ts.height - 1);
    (p.mask(x, y) ? fg : bg).push_back(tr.id);
  }
  if (fg.empty() && bg.empty()) fail(ErrorCode::data, "unmarkable proposal: no trajectory alive at its frame");
  return makeAssignment(n, fg, bg);
}

LabelAssignment solveExact(const SparseAffinity& a, const LabelAssignment& la, const SolveParams& params) {
  checkShape(a, la);
  const int n = a.n();
  const Components comp = components(a);
  std::vector<char> hasMark(comp.count, 0);
  std::vector<double> lo(comp.count, 0.5), hi(comp.count, -0.5);
  for (int i = 0; i < n; ++i)
    if (la.marks[i] != Mark::unlabeled) {
      const int c = comp.id[i];
      hasMark[c] = 1;
      lo[c] = std::min(lo[c], centeredMark(la.marks[i]));
      hi[c] = std::max(hi[c], centeredMark(la.marks[i]));
    }

  LabelAssignment out = la;
  out.unreachable = false;
  std::vector<double> y(n, 0.0);
  std::vector<int> unknown;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    if (la.marks[i] != Mark::unlabeled) {
      y[i] = centeredMark(la.marks[i]);
    } else if (!hasMark[comp.id[i]]) {
      out.unreachable = true;
      y[i] = -0.5;
    } else {
      slot[i] = static_cast<int>(unknown.size());
      unknown.push_back(i);
    }
  }

  const std::size_t m = unknown.size();
  if (m > 0) {
    // b = -L_UM y_M = sum over marked neighbours of A_ij y_j.
    std::vector<double> b(m, 0.0), diag(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const int i = unknown[k];
      const auto nb = a.neighbors(i);
      const auto wt = a.weights(i);
      for (std::size_t e = 0; e < nb.size(); ++e)
        if (la.marks[nb[e]] != Mark::unlabeled) b[k] += wt[e] * y[nb[e]];
      diag[k] = a.degree()[i];
    }
    auto applyLuu = [&](const std::vector<double>& v, std::vector<double>& out_) {
      for (std::size_t k = 0; k < m; ++k) {
        const int i = unknown[k];
        const auto nb = a.neighbors(i);
        const auto wt = a.weights(i);
        double acc = diag[k] * v[k];
        for (std::size_t e = 0; e < nb.size(); ++e) {
          const int s = slot[nb[e]];
          if (s >= 0) acc -= wt[e] * v[s];
        }
        out_[k] = acc;
      }
    };
    auto dot = [](const std::vector<double>& p, const std::vector<double>& q) {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * q[k];
      return s;
    };

    std::vector<double> sol(m, 0.0), r = b, z(m), p(m), ap(m);
    for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
    p = z;
    double rz = dot(r, z);
    const double bnorm = std::sqrt(dot(b, b));
    const int maxIt = params.maxIterations > 0 ? params.maxIterations : static_cast<int>(20 * m + 100);
    if (bnorm > 0.0) {
      for (int it = 0; it < maxIt; ++it) {
        if (std::sqrt(dot(r, r)) <= params.tolerance * bnorm) break;
        applyLuu(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rz / pap;
        for (std::size_t k = 0; k < m; ++k) {
          sol[k] += alpha * p[k];
          r[k] -= alpha * ap[k];
        }
        for (std::size_t k = 0; k < m; ++k) z[k] = r[k] / diag[k];
        const double rzNext = dot(r, z);
        if (rzNext == 0.0) break;
        const double beta = rzNext / rz;
        rz = rzNext;
        for (std::size_t k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
      }
    }
    for (std::size_t k = 0; k < m; ++k) {
      const int c = comp.id[unknown[k]];
      y[unknown[k]] = std::clamp(sol[k], lo[c], hi[c]);
    }
  }

  for (int i = 0; i < n; ++i) out.x[i] = toLabel(y[i]);
  return out;
}

LabelAssignment diffuse(const SparseAffinity& a, const LabelAssignment& la, int iters) {
  checkShape(a, la);
  if (iters < 0) fail(ErrorCode::argument, "diffuse: negative iteration count");
  if (iters == 0) return la;
  const int n = a.n();
  std::vector<double> y(n), next(n);
  for (int i = 0; i < n; ++i)
    y[i] = la.marks[i] == Mark::unlabeled ? la.x[i] - 0.5 : centeredMark(la.marks[i]);

  // Averaging never leaves the hull of a component's starting values; the
  // clamp only removes rounding excursions.
  const Components comp = components(a);
  std::vector<double> lo(comp.count, std::numeric_limits<double>::infinity());
  std::vector<double> hi(comp.count, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    lo[comp.id[i]] = std::min(lo[comp.id[i]], y[i]);
    hi[comp.id[i]] = std::max(hi[comp.id[i]], y[i]);
  }

  const auto& deg = a.degree();
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < n; ++i) {
      if (la.marks[i] != Mark::unlabeled || !(deg[i] > 0.0)) {
        next[i] = y[i];
        continue;
      }
      const auto nb = a.neighbors(i);
      const auto wt = a.weights(i);
      double acc = 0.0;
      for (std::size_t e = 0; e < nb.size(); ++e) acc += wt[e] * y[nb[e]];
      next[i] = std::clamp(acc / deg[i], lo[comp.id[i]], hi[comp.id[i]]);
    }
    std::swap(y, next);
  }
  LabelAssignment out = la;
  for (int i = 0; i < n; ++i) out.x[i] = toLabel(y[i]);
  return out;
}

TrajectoryCluster clusterFromLabels(const LabelAssignment& la, double xThresh,
                                    std::optional<int> sourceProposal) {
  TrajectoryCluster c;
  for (std::size_t i = 0; i < la.n(); ++i)
    if (la.x[i] >= xThresh) c.members.push_back(static_cast<int>(i));
  if (c.members.empty()) fail(ErrorCode::data, "cluster is empty at the membership threshold");
  c.sourceProposal = sourceProposal;
  c.softLabels = la.x;
  return c;
}

namespace {

// y = (I + D^-1/2 A D^-1/2) x; the shift keeps the spectrum in [0, 2] so the
// wanted bottom of the normalized Laplacian is the top of this operator.
class ShiftedNormalizedAffinity {
 public:
  explicit ShiftedNormalizedAffinity(const SparseAffinity& a) : a_(a), scale_(a.n(), 0.0) {
    for (int i = 0; i < a.n(); ++i)
      if (a.degree()[i] > 0.0) scale_[i] = 1.0 / std::sqrt(a.degree()[i]);
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y = x;
    for (int i = 0; i < a_.n(); ++i) {
      const auto nb = a_.neighbors(i);
      const auto wt = a_.weights(i);
      for (std::size_t e = 0; e < nb.size(); ++e)
        y.row(i) += (wt[e] * scale_[i] * scale_[nb[e]]) * x.row(nb[e]);
    }
    return y;
  }

  Eigen::MatrixXd dense() const {
    const int n = a_.n();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (const auto& e : a_.entries()) {
      const double v = e.w * scale_[e.i] * scale_[e.j];
      m(e.i, e.j) += v;
      m(e.j, e.i) += v;
    }
    return m;
  }

 private:
  const SparseAffinity& a_;
  std::vector<double> scale_;
};

// Appends the columns of `block` to basis[:, 0:used) after two passes of
// Gram-Schmidt, dropping columns that are numerically dependent.
int extendBasis(Eigen::MatrixXd& basis, int used, const Eigen::MatrixXd& block) {
  for (int c = 0; c < block.cols() && used < basis.cols(); ++c) {
    Eigen::VectorXd v = block.col(c);
    const double norm0 = v.norm();
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass)
      if (used > 0) v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
    const double norm = v.norm();
    if (norm <= 1e-10 * norm0) continue;
    basis.col(used++) = v / norm;
  }
  return used;
}

}  // namespace

SpectralEmbedding bottomEigenvectors(const SparseAffinity& a, int k, std::uint64_t seed, double tolerance) {
  const int n = a.n();
  if (k < 1 || k > n) fail(ErrorCode::argument, "bottomEigenvectors: k must be in [1, n]");
  const ShiftedNormalizedAffinity op(a);
  SpectralEmbedding out;
  out.n = n;
  out.k = k;

  auto emit = [&](const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors) {
    // `values` ascending for the shifted operator: take the top k.
    const int total = static_cast<int>(values.size());
    out.values.resize(k);
    out.vectors.assign(static_cast<std::size_t>(n) * k, 0.0);
    for (int c = 0; c < k; ++c) {
      const int src = total - 1 - c;
      out.values[c] = 2.0 - values(src);
      for (int i = 0; i < n; ++i) out.vectors[static_cast<std::size_t>(i) * k + c] = vectors(i, src);
    }
  };

  const int block = std::min(n, k + 8);
  const int steps = 8;
  if (n <= 400 || block * steps >= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.dense());
    emit(solver.eigenvalues(), solver.eigenvectors());
    return out;
  }

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd x(n, block);
  for (int c = 0; c < block; ++c)
    for (int i = 0; i < n; ++i) x(i, c) = unitReal(rng()) - 0.5;

  Eigen::VectorXd bestValues;
  Eigen::MatrixXd bestVectors;
  out.converged = false;
  for (int restart = 0; restart < 300; ++restart) {
    Eigen::MatrixXd basis(n, block * steps);
    int used = extendBasis(basis, 0, x);
    int blockStart = 0;
    for (int s = 1; s < steps; ++s) {
      const int blockEnd = used;
      if (blockEnd == blockStart) break;
      used = extendBasis(basis, used, op.apply(basis.middleCols(blockStart, blockEnd - blockStart)));
      blockStart = blockEnd;
    }
    const Eigen::MatrixXd q = basis.leftCols(used);
    const Eigen::MatrixXd mq = op.apply(q);
    Eigen::MatrixXd t = q.transpose() * mq;
    t = 0.5 * (t + t.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    const Eigen::MatrixXd ritz = q * small.eigenvectors();
    const Eigen::MatrixXd mritz = mq * small.eigenvectors();
    bestValues = small.eigenvalues();
    bestVectors = ritz;

    bool done = used >= k;
    for (int c = 0; c < k && done; ++c) {
      const int src = used - 1 - c;
      const double res = (mritz.col(src) - bestValues(src) * ritz.col(src)).norm();
      if (res > tolerance) done = false;
    }
    if (done) {
      out.converged = true;
      break;
    }
    x = ritz.rightCols(std::min(block, used));
  }
  emit(bestValues, bestVectors);
  return out;
}

std::vector<int> kmeans(const std::vector<double>& points, int n, int dim, int k, std::uint64_t seed,
                        int restarts, int iterations) {
  if (k < 1 || k > n) fail(ErrorCode::argument, "kmeans: k must be in [1, n]");
  std::mt19937_64 rng(seed);
  auto dist2 = [&](int i, const std::vector<double>& centers, int c) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = points[static_cast<std::size_t>(i) * dim + d] - centers[static_cast<std::size_t>(c) * dim + d];
      s += diff * diff;
    }
    return s;
  };

  std::vector<int> best(n, 0);
  double bestInertia = std::numeric_limits<double>::infinity();
  std::vector<double> centers(static_cast<std::size_t>(k) * dim), minD(n);
  std::vector<int> assign(n);
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    // k-means++ seeding.
    int first = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(first) * dim, dim, centers.begin());
    for (int i = 0; i < n; ++i) minD[i] = dist2(i, centers, 0);
    for (int c = 1; c < k; ++c) {
      const double total = std::accumulate(minD.begin(), minD.end(), 0.0);
      int pick = 0;
      if (total > 0.0) {
        double target = unitReal(rng()) * total;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          target -= minD[i];
          if (target < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      }
      std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(pick) * dim, dim,
                  centers.begin() + static_cast<std::ptrdiff_t>(c) * dim);
      for (int i = 0; i < n; ++i) minD[i] = std::min(minD[i], dist2(i, centers, c));
    }

    double inertia = 0.0;
    for (int it = 0; it <= iterations; ++it) {
      inertia = 0.0;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double bd = dist2(i, centers, 0);
        for (int c = 1; c < k; ++c) {
          const double d = dist2(i, centers, c);
          if (d < bd) {
            bd = d;
            arg = c;
          }
        }
        assign[i] = arg;
        inertia += bd;
      }
      if (it == iterations) break;
      std::vector<double> sum(static_cast<std::size_t>(k) * dim, 0.0);
      std::vector<int> count(k, 0);
      for (int i = 0; i < n; ++i) {
        ++count[assign[i]];
        for (int d = 0; d < dim; ++d)
          sum[static_cast<std::size_t>(assign[i]) * dim + d] += points[static_cast<std::size_t>(i) * dim + d];
      }
      for (int c = 0; c < k; ++c)
        if (count[c] > 0)
          for (int d = 0; d < dim; ++d)
            centers[static_cast<std::size_t>(c) * dim + d] = sum[static_cast<std::size_t>(c) * dim + d] / count[c];
    }
    if (inertia < bestInertia) {
      bestInertia = inertia;
      best = assign;
    }
  }
  return best;
}

std::vector<std::vector<TrajectoryCluster>> spectralClusters(const SparseAffinity& a,
                                                             std::span<const int> kList,
                                                             const SpectralParams& params,
                                                             std::vector<std::string>* warnings) {
  for (int k : kList)
    if (k < 2 || k > params.maxEigenvectors)
      fail(ErrorCode::argument, "spectralClusters: k must be in [2, " +
                                    std::to_string(params.maxEigenvectors) + "], got " + std::to_string(k));
  const int n = a.n();
  std::vector<std::vector<TrajectoryCluster>> out;
  int kmax = 0;
  for (int k : kList)
    if (k <= n) kmax = std::max(kmax, k);
  SpectralEmbedding emb;
  if (kmax > 0) {
    emb = bottomEigenvectors(a, kmax, params.seed, params.tolerance);
    if (!emb.converged && warnings) warnings->push_back("eigen-solver did not reach tolerance");
  }

  for (int k : kList) {
    if (k > n) {
      if (warnings) warnings->push_back("skipping k=" + std::to_string(k) + " > n=" + std::to_string(n));
      out.emplace_back();
      continue;
    }
    std::vector<double> rows(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < n; ++i) {
      double norm = 0.0;
      for (int c = 0; c < k; ++c) {
        const double v = emb.vectors[static_cast<std::size_t>(i) * kmax + c];
        rows[static_cast<std::size_t>(i) * k + c] = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (int c = 0; c < k; ++c) rows[static_cast<std::size_t>(i) * k + c] /= norm;
    }
    const std::vector<int> label =
        kmeans(rows, n, k, k, splitmix64(params.seed ^ static_cast<std::uint64_t>(k)), params.restarts,
               params.iterations);
    std::vector<TrajectoryCluster> groups(k);
    for (int i = 0; i < n; ++i) groups[label[i]].members.push_back(i);
    std::vector<TrajectoryCluster> kept;
    for (auto& g : groups) {
      if (g.members.empty()) continue;
      g.softLabels.assign(n, 0.0);
      for (int i : g.members) g.softLabels[i] = 1.0;
      kept.push_back(std::move(g));
    }
    out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace moptube
