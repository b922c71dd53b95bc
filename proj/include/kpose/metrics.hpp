#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpose/error.hpp"
#include "kpose/geometry.hpp"
#include "kpose/kdtree.hpp"
#include "kpose/mesh.hpp"

namespace kpose {

inline constexpr double kDefaultDiameterFraction = 0.1;
inline constexpr std::size_t kMaxMetricPoints = 10000;
inline constexpr std::size_t kExactNearestLimit = 5000;

/// Mean distance between corresponding model points under the two poses.
inline double add(const Pose& gt, const Pose& pred, const PointCloud& model) {
  if (model.empty()) throw Error(ErrorKind::DegenerateInput, "ADD on an empty model");
  double sum = 0.0;
  for (const auto& x : model.points)
    sum += (transform_point(gt, x) - transform_point(pred, x)).norm();
  return sum / static_cast<double>(model.size());
}

/// Mean distance from each gt-transformed point to the closest pred-transformed point.
inline double add_s(const Pose& gt, const Pose& pred, const PointCloud& model) {
  if (model.empty()) throw Error(ErrorKind::DegenerateInput, "ADD-S on an empty model");
  const PointCloud moved_gt = transformed(model, gt);
  const PointCloud moved_pred = transformed(model, pred);
  double sum = 0.0;
  if (model.size() <= kExactNearestLimit) {
    for (const auto& p : moved_gt.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : moved_pred.points) best = std::min(best, dist2(p, q));
      sum += std::sqrt(best);
    }
  } else {
    const KdTree tree(moved_pred.points);
    for (const auto& p : moved_gt.points) sum += std::sqrt(tree.nearest(p).d2);
  }
  return sum / static_cast<double>(model.size());
}

/// Deterministic stride subsample used as the ADD point set for large models.
inline PointCloud metric_points(const PointCloud& model) {
  return subsample_stride(model, kMaxMetricPoints);
}

struct EvalRecord {
  std::string object_id;
  double add_value = 0.0;  // mm; ADD or ADD-S depending on `symmetric`
  double threshold = 0.0;  // mm
  bool symmetric = false;
  bool correct = false;    // add_value < threshold, strictly
};

/// Correctness rule: strictly below the threshold; equality counts as a miss.
inline bool is_correct(double value, double threshold) { return value < threshold; }

inline EvalRecord score_pose(const std::string& object_id, const Pose& gt,
                             const std::optional<Pose>& pred, const PointCloud& model_points,
                             double diameter_mm, bool symmetric,
                             double diameter_fraction = kDefaultDiameterFraction) {
  EvalRecord r;
  r.object_id = object_id;
  r.symmetric = symmetric;
  r.threshold = diameter_fraction * diameter_mm;
  if (pred) {
    r.add_value = symmetric ? add_s(gt, *pred, model_points) : add(gt, *pred, model_points);
  } else {
    r.add_value = std::numeric_limits<double>::infinity();
  }
  r.correct = is_correct(r.add_value, r.threshold);
  return r;
}

struct ObjectAccuracy {
  std::string object_id;
  std::size_t total = 0;
  std::size_t correct = 0;
  bool symmetric = false;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct EvalSummary {
  std::vector<ObjectAccuracy> per_object;  // sorted by object_id
  double mean_accuracy = 0.0;              // unweighted mean over objects
};

/// Per-object accuracy from counts, and the class-weighted mean over objects.
inline EvalSummary summarize(const std::vector<EvalRecord>& records) {
  std::map<std::string, ObjectAccuracy> by_object;
  for (const auto& r : records) {
    auto& acc = by_object[r.object_id];
    acc.object_id = r.object_id;
    acc.symmetric = r.symmetric;
    ++acc.total;
    acc.correct += r.correct ? 1 : 0;
  }
  EvalSummary s;
  double sum = 0.0;
  for (auto& [id, acc] : by_object) {
    sum += acc.accuracy();
    s.per_object.push_back(acc);
  }
  s.mean_accuracy = s.per_object.empty() ? 0.0 : sum / static_cast<double>(s.per_object.size());
  return s;
}

struct EvalInput {
  Pose gt;
  std::optional<Pose> pred;  // nullopt: no estimate, scored as incorrect
  const PointCloud* model = nullptr;
  std::string object_id;
  bool symmetric = false;
};

/// Scores each input with ADD (or ADD-S when symmetric) against
/// diameter_fraction * diameter(model) and aggregates per object.
inline EvalSummary evaluate(const std::vector<EvalInput>& inputs,
                            double diameter_fraction = kDefaultDiameterFraction,
                            std::vector<EvalRecord>* records_out = nullptr) {
  if (!(diameter_fraction > 0.0))
    throw Error(ErrorKind::InvalidArgument, "diameter fraction must be positive");
  std::map<const PointCloud*, std::pair<double, PointCloud>> cache;
  std::vector<EvalRecord> records;
  records.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.model == nullptr) throw Error(ErrorKind::InvalidArgument, "evaluation input without model");
    auto it = cache.find(in.model);
    if (it == cache.end())
      it = cache.emplace(in.model, std::make_pair(diameter(*in.model), metric_points(*in.model))).first;
    records.push_back(score_pose(in.object_id, in.gt, in.pred, it->second.second, it->second.first,
                                 in.symmetric, diameter_fraction));
  }
  EvalSummary s = summarize(records);
  if (records_out) *records_out = std::move(records);
  return s;
}

}  // namespace kpose
