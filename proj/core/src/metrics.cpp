#include "trapcc/metrics.hpp"

#include <fstream>
#include <sstream>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"

namespace trapcc {

Assignment assign_nearest(const PointCloud& from, const SpatialIndex& to) {
  Assignment a;
  a.index.reserve(from.size());
  a.squared_distance.reserve(from.size());
  for (const auto& p : from.points) {
    const NearestResult r = to.nearest(p);
    a.index.push_back(r.index);
    a.squared_distance.push_back(r.squared_distance);
  }
  return a;
}

double directed_mean_sq(const PointCloud& from, const SpatialIndex& to) {
  require_non_empty(from, "source cloud");
  double sum = 0.0;
  for (const auto& p : from.points) sum += to.nearest(p).squared_distance;
  return sum / static_cast<double>(from.size());
}

double chamfer(const SpatialIndex& s1, const SpatialIndex& s2) {
  return directed_mean_sq(s1.cloud(), s2) + directed_mean_sq(s2.cloud(), s1);
}

double chamfer(const PointCloud& s1, const PointCloud& s2) {
  require_non_empty(s1, "s1");
  require_non_empty(s2, "s2");
  return chamfer(SpatialIndex(s1), SpatialIndex(s2));
}

double mcd(const PointCloud& s1, const SpatialIndex& s2) { return directed_mean_sq(s1, s2); }

double mcd(const PointCloud& s1, const PointCloud& s2) {
  require_non_empty(s1, "s1");
  require_non_empty(s2, "s2");
  return directed_mean_sq(s1, SpatialIndex(s2));
}

namespace {

// Adds d/d(from, to) of (1/|from|) sum ||f - t*(f)||^2 into the two buffers.
double accumulate_directed(const PointCloud& from, const SpatialIndex& to, std::vector<Point3>& grad_from,
                           std::vector<Point3>& grad_to) {
  const double inv_n = 1.0 / static_cast<double>(from.size());
  const double w = 2.0 * inv_n;
  double sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const NearestResult r = to.nearest(from[i]);
    sum += r.squared_distance;
    const Point3 diff = from[i] - to.cloud()[r.index];
    grad_from[i] += w * diff;
    grad_to[r.index] -= w * diff;
  }
  return sum * inv_n;
}

}  // namespace

MetricWithGrad chamfer_with_grad(const SpatialIndex& s1, const SpatialIndex& s2) {
  MetricWithGrad out;
  out.grad_s1.assign(s1.size(), Point3::Zero());
  out.grad_s2.assign(s2.size(), Point3::Zero());
  const double t1 = accumulate_directed(s1.cloud(), s2, out.grad_s1, out.grad_s2);
  const double t2 = accumulate_directed(s2.cloud(), s1, out.grad_s2, out.grad_s1);
  out.value = t1 + t2;
  return out;
}

MetricWithGrad mcd_with_grad(const SpatialIndex& s1, const SpatialIndex& s2) {
  MetricWithGrad out;
  out.grad_s1.assign(s1.size(), Point3::Zero());
  out.grad_s2.assign(s2.size(), Point3::Zero());
  out.value = accumulate_directed(s1.cloud(), s2, out.grad_s1, out.grad_s2);
  return out;
}

std::vector<Point3> chamfer_grad(const PointCloud& s1, const PointCloud& s2, GradWrt wrt) {
  require_non_empty(s1, "s1");
  require_non_empty(s2, "s2");
  auto g = chamfer_with_grad(SpatialIndex(s1), SpatialIndex(s2));
  return wrt == GradWrt::S1 ? std::move(g.grad_s1) : std::move(g.grad_s2);
}

std::vector<Point3> mcd_grad(const PointCloud& s1, const PointCloud& s2, GradWrt wrt) {
  require_non_empty(s1, "s1");
  require_non_empty(s2, "s2");
  auto g = mcd_with_grad(SpatialIndex(s1), SpatialIndex(s2));
  return wrt == GradWrt::S1 ? std::move(g.grad_s1) : std::move(g.grad_s2);
}

const char* to_string(View view) {
  switch (view) {
    case View::Side: return "side";
    case View::Front: return "front";
    case View::BirdsEye: return "birds_eye";
  }
  return "unknown";
}

namespace {

Point2 project_point(const Point3& p, View view) {
  switch (view) {
    case View::Side: return {p.x(), p.z()};
    case View::Front: return {p.y(), p.z()};
    case View::BirdsEye: return {p.x(), p.y()};
  }
  return {p.x(), p.y()};
}

// Lifts a projection back into 3D with a zero third coordinate so the 3D
// index can be reused; the extra 0*0 term leaves distances unchanged.
PointCloud flattened(const PointCloud& cloud, View view) {
  PointCloud out(cloud.frame);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    const Point2 q = project_point(p, view);
    out.points.emplace_back(q.x(), q.y(), 0.0);
  }
  return out;
}

}  // namespace

std::vector<Point2> project_2d(const PointCloud& cloud, View view) {
  require_non_empty(cloud, "cloud");
  std::vector<Point2> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(project_point(p, view));
  return out;
}

double contour_diff(const PointCloud& a, const PointCloud& b, View view) {
  require_non_empty(a, "a");
  require_non_empty(b, "b");
  return chamfer(flattened(a, view), flattened(b, view));
}

EvalReport evaluate(const PointCloud& prediction, const PointCloud& input, const PointCloud& whole_gt,
                    std::span<const PointCloud> partial_gts) {
  require_non_empty(prediction, "prediction");
  require_non_empty(input, "input");
  require_non_empty(whole_gt, "whole GT");
  const SpatialIndex pred_index(prediction);
  double sum = chamfer(pred_index, SpatialIndex(whole_gt));
  for (const auto& gt : partial_gts) {
    require_non_empty(gt, "partial GT");
    sum += chamfer(pred_index, SpatialIndex(gt));
  }
  EvalReport r;
  r.l_g = sum / static_cast<double>(1 + partial_gts.size());
  r.l_i = directed_mean_sq(input, pred_index);
  r.l_s = contour_diff(prediction, whole_gt, View::Side);
  r.mean_cd = (r.l_g + r.l_i + r.l_s) / 3.0;
  return r;
}

EvalReport mean_report(std::span<const EvalRow> rows) {
  EvalReport m;
  if (rows.empty()) return m;
  for (const auto& row : rows) {
    m.l_g += row.report.l_g;
    m.l_i += row.report.l_i;
    m.l_s += row.report.l_s;
    m.mean_cd += row.report.mean_cd;
  }
  const double n = static_cast<double>(rows.size());
  m.l_g /= n;
  m.l_i /= n;
  m.l_s /= n;
  m.mean_cd /= n;
  return m;
}

void write_eval_csv(const std::filesystem::path& path, std::span<const EvalRow> rows) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "instance_id,l_g,l_i,l_s,mean_cd\n";
  for (const auto& row : rows) {
    ss << row.instance_id << ',' << row.report.l_g << ',' << row.report.l_i << ',' << row.report.l_s
       << ',' << row.report.mean_cd << '\n';
  }
  atomic_write(path, ss.str());
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "instance_id,l_g,l_i,l_s,mean_cd") {
    throw Error(ErrorCode::Format, path.string() + ": unexpected CSV header");
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EvalRow row;
    std::string field;
    std::getline(ls, row.instance_id, ',');
    double* targets[] = {&row.report.l_g, &row.report.l_i, &row.report.l_s, &row.report.mean_cd};
    for (double* t : targets) {
      if (!std::getline(ls, field, ',')) throw Error(ErrorCode::Format, path.string() + ": short row");
      *t = std::stod(field);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace trapcc
