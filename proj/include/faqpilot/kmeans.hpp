#pragma once

#include <cstdint>
#include <vector>

#include "faqpilot/embedding.hpp"

namespace faqpilot {

struct KMeansOptions {
  std::size_t k = 2;
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  /// Independent k-means++ restarts; the lowest objective wins.
  std::size_t n_init = 1;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;  // point -> cluster
  std::vector<Vector> centroids;
  double objective = 0.0;                // sum of squared Euclidean distances
  std::vector<double> objective_trace;   // after each Lloyd update of the winning run
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t reseeds = 0;               // empty clusters repaired
};

/// Lloyd's algorithm with seeded k-means++ initialization. Empty clusters are
/// repaired by moving in the point farthest from its centroid. Stops when no
/// assignment changes or after max_iter updates.
/// Throws invalid-argument for empty input or k > n, dim-mismatch for ragged input.
KMeansResult kmeans(const std::vector<Vector>& points, const KMeansOptions& options);

double squared_distance(const Vector& a, const Vector& b);
double kmeans_objective(const std::vector<Vector>& points, const std::vector<std::size_t>& assignments,
                        const std::vector<Vector>& centroids);

}  // namespace faqpilot
