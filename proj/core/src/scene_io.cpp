#include "trapcc/scene_io.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"

namespace trapcc {

std::size_t SceneSet::object_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.objects.size();
  return n;
}

namespace {

OrientedBox box_from_json(const nlohmann::json& j) {
  OrientedBox b;
  const auto c = j.at("center").get<std::array<double, 3>>();
  b.center = Point3(c[0], c[1], c[2]);
  b.length = j.at("length").get<double>();
  b.width = j.at("width").get<double>();
  b.height = j.at("height").get<double>();
  b.yaw = j.at("yaw").get<double>();
  return b;
}

nlohmann::json box_to_json(const OrientedBox& b) {
  return {{"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"length", b.length},
          {"width", b.width},
          {"height", b.height},
          {"yaw", b.yaw}};
}

}  // namespace

SceneSet load_scenes(const std::filesystem::path& dir) {
  SceneSet set;
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorCode::Io, "scene directory " + dir.string() + " does not exist");
    }
    return set;
  }
  try {
    const auto j = nlohmann::json::parse(read_file(manifest_path));
    if (j.at("format") != "trapcc-scenes") throw Error(ErrorCode::Format, "not a scene manifest");
    const auto origin = j.value("sensor_origin", std::array<double, 3>{0.0, 0.0, 0.0});
    set.sensor_origin = Point3(origin[0], origin[1], origin[2]);
    for (const auto& jf : j.at("frames")) {
      SceneFrame frame;
      frame.frame = jf.at("frame").get<int>();
      for (const auto& jo : jf.at("objects")) {
        SceneEntry e;
        e.object.object_id = jo.at("id").get<int>();
        e.object.box = box_from_json(jo.at("box"));
        if (jo.contains("detection_score")) e.object.box.detection_score = jo.at("detection_score").get<double>();
        e.object.box.validate();
        e.cloud_file = jo.at("cloud").get<std::string>();
        e.object.cloud = read_cloud(dir / e.cloud_file, Frame::Sensor);
        frame.objects.push_back(std::move(e));
      }
      std::sort(frame.objects.begin(), frame.objects.end(),
                [](const SceneEntry& a, const SceneEntry& b) { return a.object.object_id < b.object.object_id; });
      set.frames.push_back(std::move(frame));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, manifest_path.string() + ": " + e.what());
  }
  std::sort(set.frames.begin(), set.frames.end(),
            [](const SceneFrame& a, const SceneFrame& b) { return a.frame < b.frame; });
  return set;
}

void save_scene_manifest(const SceneSet& scenes, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["format"] = "trapcc-scenes";
  j["version"] = 1;
  j["sensor_origin"] = {scenes.sensor_origin.x(), scenes.sensor_origin.y(), scenes.sensor_origin.z()};
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : scenes.frames) {
    nlohmann::json jf;
    jf["frame"] = f.frame;
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& e : f.objects) {
      nlohmann::json jo;
      jo["id"] = e.object.object_id;
      jo["box"] = box_to_json(e.object.box);
      if (e.object.box.detection_score) jo["detection_score"] = *e.object.box.detection_score;
      jo["cloud"] = e.cloud_file;
      objects.push_back(std::move(jo));
    }
    jf["objects"] = std::move(objects);
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  atomic_write(dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<TrackedInstance> tracked_instances(const SceneSet& scenes, double crop_margin) {
  std::map<int, TrackedInstance> by_id;
  for (const auto& frame : scenes.frames) {
    for (const auto& e : frame.objects) {
      PointCloud cropped = crop_to_box(e.object.cloud, e.object.box, crop_margin);
      if (cropped.empty()) continue;
      auto& inst = by_id[e.object.object_id];
      inst.track_id = e.object.object_id;
      inst.observations.push_back({frame.frame, std::move(cropped), e.object.box});
    }
  }
  std::vector<TrackedInstance> out;
  out.reserve(by_id.size());
  for (auto& [id, inst] : by_id) out.push_back(std::move(inst));
  return out;
}

std::vector<SceneObject> frame_objects(const SceneFrame& frame) {
  std::vector<SceneObject> out;
  out.reserve(frame.objects.size());
  for (const auto& e : frame.objects) out.push_back(e.object);
  return out;
}

}  // namespace trapcc
