#include "uavsec/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace uavsec {

double sum_squared_error(std::span<const Vec2> points, std::span<const int> labels,
                         std::span<const Vec2> centroids) {
  double ess = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    ess += (points[i] - centroids[static_cast<std::size_t>(labels[i])]).squared_norm();
  return ess;
}

namespace {

// Nearest centroid; on ties the current label wins, otherwise the lowest index.
int nearest(Vec2 p, std::span<const Vec2> centroids, int current) {
  int best = current >= 0 ? current : 0;
  double best_d = (p - centroids[static_cast<std::size_t>(best)]).squared_norm();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (p - centroids[c]).squared_norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void repair_empty(std::span<const Vec2> users, std::vector<int>& labels,
                  std::span<const Vec2> centroids, int m) {
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c = 0; c < m; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    const int largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (labels[i] != largest) continue;
      const double d = (users[i] - centroids[static_cast<std::size_t>(largest)]).squared_norm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    labels[far] = c;
    --counts[static_cast<std::size_t>(largest)];
    ++counts[static_cast<std::size_t>(c)];
  }
}

std::vector<Vec2> means(std::span<const Vec2> users, std::span<const int> labels, int m) {
  std::vector<Vec2> sum(static_cast<std::size_t>(m));
  std::vector<int> count(static_cast<std::size_t>(m), 0);
  for (std::size_t i = 0; i < users.size(); ++i) {
    sum[static_cast<std::size_t>(labels[i])] = sum[static_cast<std::size_t>(labels[i])] + users[i];
    ++count[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = sum[c] * (1.0 / count[c]);
  return sum;
}

}  // namespace

ClusterAssignment kmeans(std::span<const Vec2> users, int m, std::uint64_t seed, int max_iters) {
  const int k = static_cast<int>(users.size());
  if (m < 1) throw std::invalid_argument("kmeans: need at least one cluster");
  if (m > k) throw std::invalid_argument("kmeans: more clusters than users");

  ClusterAssignment out;
  std::mt19937_64 rng(seed);
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates so the draw does not depend on std::sample internals.
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, k - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  out.centroids.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out.centroids.push_back(users[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);

  out.labels.assign(static_cast<std::size_t>(k), -1);
  for (int i = 0; i < k; ++i)
    out.labels[static_cast<std::size_t>(i)] = nearest(users[static_cast<std::size_t>(i)], out.centroids, -1);
  repair_empty(users, out.labels, out.centroids, m);
  out.ess_history.push_back(sum_squared_error(users, out.labels, out.centroids));

  for (int it = 0; it < max_iters; ++it) {
    out.centroids = means(users, out.labels, m);
    out.ess_history.push_back(sum_squared_error(users, out.labels, out.centroids));
    ++out.iterations;

    std::vector<int> next = out.labels;
    for (int i = 0; i < k; ++i)
      next[static_cast<std::size_t>(i)] =
          nearest(users[static_cast<std::size_t>(i)], out.centroids, out.labels[static_cast<std::size_t>(i)]);
    repair_empty(users, next, out.centroids, m);
    if (next == out.labels) break;
    out.labels = std::move(next);
  }
  out.ess = sum_squared_error(users, out.labels, out.centroids);
  out.uav_of_cluster.resize(static_cast<std::size_t>(m));
  std::iota(out.uav_of_cluster.begin(), out.uav_of_cluster.end(), 0);
  return out;
}

std::vector<int> assign_to_uavs(std::span<const Vec2> centroids, std::span<const Vec2> uav_starts) {
  const std::size_t m = centroids.size();
  if (m != uav_starts.size()) throw std::invalid_argument("assign_to_uavs: count mismatch");
  std::vector<int> best(m);
  std::iota(best.begin(), best.end(), 0);
  if (m <= 1) return best;

  if (m <= 6) {
    std::vector<int> perm = best;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (std::size_t c = 0; c < m; ++c) cost += distance(centroids[c], uav_starts[static_cast<std::size_t>(perm[c])]);
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  std::vector<char> cluster_done(m, 0), uav_done(m, 0);
  for (std::size_t round = 0; round < m; ++round) {
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t bc = 0, bu = 0;
    for (std::size_t c = 0; c < m; ++c) {
      if (cluster_done[c]) continue;
      for (std::size_t u = 0; u < m; ++u) {
        if (uav_done[u]) continue;
        const double d = distance(centroids[c], uav_starts[u]);
        if (d < best_d) {
          best_d = d;
          bc = c;
          bu = u;
        }
      }
    }
    best[bc] = static_cast<int>(bu);
    cluster_done[bc] = 1;
    uav_done[bu] = 1;
  }
  return best;
}

}  // namespace uavsec
