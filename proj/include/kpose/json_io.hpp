#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/sampling.hpp"

// JSON shapes:
//   intrinsics  {"fx","fy","cx","cy"}
//   pose        {"rotation": [9, row-major], "translation": [3]}
//   keypoints   {"object_id", "points": [[x,y,z],...]}  (+ "strategy", "source_indices")
//   roi         {"origin": [x0,y0], "size": [w,h]}
//   2D points   {"points": [[u,v] | null,...], "peaks"?: [...], "roi"?: roi}

namespace kpose::io {

using nlohmann::json;

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorKind::ParseError, what); }

inline double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) bad(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

inline std::vector<double> numbers(const json& j, std::size_t expected, const std::string& what) {
  if (!j.is_array() || j.size() != expected)
    bad(what + " must be an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) bad(what + " contains a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k{number(j, "fx"), number(j, "fy"), number(j, "cx"), number(j, "cy")};
  validate(k);
  return k;
}

inline json to_json(const Pose& p) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
  return {{"rotation", rot},
          {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rotation") || !j.contains("translation"))
    bad("pose needs 'rotation' and 'translation'");
  const auto r = numbers(j.at("rotation"), 9, "rotation");
  const auto t = numbers(j.at("translation"), 3, "translation");
  Pose p;
  for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = r[static_cast<std::size_t>(i)];
  p.translation = Vec3(t[0], t[1], t[2]);
  try {
    validate(p);
  } catch (const Error& e) {
    bad(e.what());
  }
  return p;
}

inline json to_json(const RoiTransform& roi) {
  return {{"origin", {roi.bbox_origin.x(), roi.bbox_origin.y()}},
          {"size", {roi.bbox_size.x(), roi.bbox_size.y()}}};
}

inline RoiTransform roi_from_json(const json& j) {
  if (!j.is_object()) bad("roi must be an object");
  const auto o = numbers(j.at("origin"), 2, "roi origin");
  const auto s = numbers(j.at("size"), 2, "roi size");
  RoiTransform roi = RoiTransform::from_bbox(Vec2(o[0], o[1]), Vec2(s[0], s[1]));
  validate(roi);
  return roi;
}

inline json to_json(const KeypointSet& kp) {
  json pts = json::array();
  for (const auto& p : kp.points) pts.push_back({p.x(), p.y(), p.z()});
  return {{"object_id", kp.object_id},
          {"strategy", to_string(kp.strategy)},
          {"points", pts},
          {"source_indices", kp.source_indices}};
}

inline KeypointSet keypoints_from_json(const json& j) {
  if (!j.is_object() || !j.contains("points")) bad("keypoint file needs 'points'");
  KeypointSet kp;
  if (j.contains("object_id")) kp.object_id = j.at("object_id").get<std::string>();
  if (j.contains("strategy")) {
    try {
      kp.strategy = parse_strategy(j.at("strategy").get<std::string>());
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  for (const auto& p : j.at("points")) {
    const auto v = numbers(p, 3, "3D keypoint");
    kp.points.emplace_back(v[0], v[1], v[2]);
  }
  if (j.contains("source_indices")) kp.source_indices = j.at("source_indices").get<std::vector<std::size_t>>();
  return kp;
}

/// 2D keypoints; a null entry (or a peak below the caller's cut) marks a missing detection.
struct Keypoints2D {
  std::vector<std::optional<Vec2>> points;
  std::vector<double> peaks;  // empty when not provided
  std::optional<RoiTransform> roi;
};

inline json to_json(const Keypoints2D& k) {
  json pts = json::array();
  for (const auto& p : k.points) {
    if (p) pts.push_back({p->x(), p->y()});
    else pts.push_back(nullptr);
  }
  json j = {{"points", pts}};
  if (!k.peaks.empty()) j["peaks"] = k.peaks;
  if (k.roi) j["roi"] = to_json(*k.roi);
  return j;
}

inline Keypoints2D keypoints2d_from_json(const json& j) {
  if (!j.is_object() || !j.contains("points")) bad("2D keypoint file needs 'points'");
  Keypoints2D k;
  for (const auto& p : j.at("points")) {
    if (p.is_null()) {
      k.points.emplace_back(std::nullopt);
      continue;
    }
    const auto v = numbers(p, 2, "2D keypoint");
    k.points.emplace_back(Vec2(v[0], v[1]));
  }
  if (j.contains("peaks")) {
    k.peaks = numbers(j.at("peaks"), k.points.size(), "peaks");
  }
  if (j.contains("roi")) k.roi = roi_from_json(j.at("roi"));
  return k;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace kpose::io
