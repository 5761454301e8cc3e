#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uavsec/geometry.hpp"

namespace uavsec {

struct ClusterAssignment {
  std::vector<int> labels;        // per user, in [0, m)
  std::vector<Vec2> centroids;    // per cluster
  double ess = 0.0;               // sum of squared distances to centroids
  std::vector<int> uav_of_cluster;
  // ESS after the initial assignment and after every centroid update.
  std::vector<double> ess_history;
  int iterations = 0;
};

double sum_squared_error(std::span<const Vec2> points, std::span<const int> labels,
                         std::span<const Vec2> centroids);

/// Lloyd's algorithm seeded with m distinct users drawn under `seed`. Stops
/// when labels are stable or after max_iters. An emptied cluster takes the
/// point farthest from its centroid in the largest cluster.
/// uav_of_cluster is left as the identity; see assign_to_uavs.
ClusterAssignment kmeans(std::span<const Vec2> users, int m, std::uint64_t seed, int max_iters);

/// Bijective cluster -> UAV map minimizing the total centroid-to-start
/// distance. Exact for up to 6 clusters, greedy nearest pair beyond.
std::vector<int> assign_to_uavs(std::span<const Vec2> centroids, std::span<const Vec2> uav_starts);

}  // namespace uavsec
