#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "trapcc/geometry.hpp"

namespace trapcc::testing {

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0,
                               Frame frame = Frame::Object) {
  std::uniform_real_distribution<double> u(lo, hi);
  PointCloud c(frame);
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

/// Exhaustive nearest neighbour; lowest index wins ties.
inline std::pair<std::size_t, double> brute_nearest(const PointCloud& cloud, const Point3& q) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = squared_distance(q, cloud[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, best_d};
}

/// O(n m) one-sided term, summed in point order.
inline double brute_directed(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (const auto& p : from.points) sum += brute_nearest(to, p).second;
  return sum / static_cast<double>(from.size());
}

inline double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  return brute_directed(a, b) + brute_directed(b, a);
}

inline double brute_mcd(const PointCloud& a, const PointCloud& b) { return brute_directed(a, b); }

/// Central difference of f with respect to one scalar.
template <typename F>
double central_difference(double& x, double h, F&& f) {
  const double x0 = x;
  x = x0 + h;
  const double fp = f();
  x = x0 - h;
  const double fm = f();
  x = x0;
  return (fp - fm) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace trapcc::testing
