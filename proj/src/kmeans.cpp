#include "faqpilot/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "faqpilot/error.hpp"

namespace faqpilot {

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double kmeans_objective(const std::vector<Vector>& points, const std::vector<std::size_t>& assignments,
                        const std::vector<Vector>& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += squared_distance(points[i], centroids[assignments[i]]);
  return total;
}

namespace {

std::vector<Vector> plus_plus_init(const std::vector<Vector>& points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Vector> centroids;
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  centroids.push_back(points[first]);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);

  while (centroids.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t next = n;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0 && d2[i] > 0.0) {
          next = i;
          break;
        }
      }
      if (next == n) {  // rounding left r slightly positive
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            next = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a centroid; take any unchosen point.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      next = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
    chosen[next] = true;
    centroids.push_back(points[next]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

KMeansResult lloyd(const std::vector<Vector>& points, std::size_t k, std::size_t max_iter, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  KMeansResult r;
  r.centroids = plus_plus_init(points, k, rng);
  r.assignments.assign(n, std::numeric_limits<std::size_t>::max());

  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // Assignment step. Ties keep the current cluster, then the lowest index.
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = r.assignments[i];
      double best_d = best < k ? squared_distance(points[i], r.centroids[best]) : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], r.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != r.assignments[i]) {
        r.assignments[i] = best;
        changed = true;
      }
      dist[i] = best_d;
    }
    if (!changed && iter > 0) {
      r.converged = true;
      break;
    }

    // Empty-cluster repair: move the farthest point from a cluster of size > 1.
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : r.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[r.assignments[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      if (far == n) break;  // cannot happen when k <= n
      --sizes[r.assignments[far]];
      r.assignments[far] = c;
      sizes[c] = 1;
      dist[far] = 0.0;
      ++r.reseeds;
    }

    // Update step.
    std::vector<Vector> sums(k, Vector(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[r.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(sizes[c]);
    }
    r.centroids = std::move(sums);
    r.iterations = iter + 1;
    r.objective_trace.push_back(kmeans_objective(points, r.assignments, r.centroids));
  }
  r.objective = r.objective_trace.empty() ? kmeans_objective(points, r.assignments, r.centroids)
                                          : r.objective_trace.back();
  return r;
}

}  // namespace

KMeansResult kmeans(const std::vector<Vector>& points, const KMeansOptions& options) {
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "k-means needs at least one point");
  if (options.k == 0 || options.k > points.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "k = " + std::to_string(options.k) + " with " + std::to_string(points.size()) + " points");
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(ErrorCode::DimMismatch, "k-means points differ in dimension");
  }
  const std::size_t max_iter = std::max<std::size_t>(1, options.max_iter);

  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  bool have = false;
  for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
    auto r = lloyd(points, options.k, max_iter, rng);
    if (!have || r.objective < best.objective) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace faqpilot
