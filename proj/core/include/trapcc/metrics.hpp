#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trapcc/geometry.hpp"
#include "trapcc/spatial_index.hpp"

namespace trapcc {

/// Per-point nearest-neighbour assignment from `from` into `to`.
struct Assignment {
  std::vector<std::size_t> index;
  std::vector<double> squared_distance;
};

Assignment assign_nearest(const PointCloud& from, const SpatialIndex& to);

/// Mean over `from` of the squared distance to the nearest point of `to`,
/// summed in point order.
double directed_mean_sq(const PointCloud& from, const SpatialIndex& to);

/// Two-sided Chamfer distance in squared metres.
double chamfer(const PointCloud& s1, const PointCloud& s2);
double chamfer(const SpatialIndex& s1, const SpatialIndex& s2);

/// One-sided Chamfer term from the sparse cloud `s1` to the dense cloud `s2`.
double mcd(const PointCloud& s1, const PointCloud& s2);
double mcd(const PointCloud& s1, const SpatialIndex& s2);

enum class GradWrt { S1, S2 };

/// d chamfer(s1, s2) / d coordinates of the chosen cloud, holding the
/// nearest-neighbour assignments fixed at the evaluation point.
std::vector<Point3> chamfer_grad(const PointCloud& s1, const PointCloud& s2, GradWrt wrt);
std::vector<Point3> mcd_grad(const PointCloud& s1, const PointCloud& s2, GradWrt wrt);

/// Value together with gradients with respect to both inputs.
struct MetricWithGrad {
  double value = 0.0;
  std::vector<Point3> grad_s1;
  std::vector<Point3> grad_s2;
};

MetricWithGrad chamfer_with_grad(const SpatialIndex& s1, const SpatialIndex& s2);
MetricWithGrad mcd_with_grad(const SpatialIndex& s1, const SpatialIndex& s2);

enum class View { Side, Front, BirdsEye };

inline constexpr View kAllViews[] = {View::Side, View::Front, View::BirdsEye};

const char* to_string(View view);

/// Side drops y, Front drops x, BirdsEye drops z.
std::vector<Point2> project_2d(const PointCloud& cloud, View view);

/// Chamfer distance between the 2D projections of two object-frame clouds.
double contour_diff(const PointCloud& a, const PointCloud& b, View view);

struct EvalReport {
  double l_g = 0.0;
  double l_i = 0.0;
  double l_s = 0.0;
  double mean_cd = 0.0;
};

/// L-G: mean Chamfer distance of the prediction to the whole GT and each
/// partial GT; L-I: MCD from the input to the prediction; L-S: side-view
/// contour difference between prediction and whole GT.
EvalReport evaluate(const PointCloud& prediction, const PointCloud& input, const PointCloud& whole_gt,
                    std::span<const PointCloud> partial_gts);

struct EvalRow {
  std::string instance_id;
  EvalReport report;
};

/// Arithmetic mean of every field. Empty input yields all zeros.
EvalReport mean_report(std::span<const EvalRow> rows);

/// CSV with header `instance_id,l_g,l_i,l_s,mean_cd`; written atomically.
void write_eval_csv(const std::filesystem::path& path, std::span<const EvalRow> rows);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);

}  // namespace trapcc
