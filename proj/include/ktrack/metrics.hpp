#ifndef KTRACK_METRICS_HPP
#define KTRACK_METRICS_HPP

#include <ktrack/errors.hpp>
#include <ktrack/geometry.hpp>

#include <vector>

namespace ktrack {

struct FrameError {
  double rotation_deg = 0.0;
  double translation_mm = 0.0;
};

struct MetricAggregates {
  double pct_5deg5cm = 0.0;
  double pct_5deg5mm = 0.0;
  double mean_rot_deg = 0.0;
  double mean_trans_mm = 0.0;
};

struct MetricReport {
  std::vector<FrameError> frames;
  MetricAggregates aggregates;
};

inline FrameError pose_error(const Pose& estimate, const Pose& truth) {
  return {rad2deg(geodesic_angle(estimate.rotation, truth.rotation)),
          (estimate.translation - truth.translation).norm() * 1000.0};
}

/// Threshold percentages (both bounds must hold) and arithmetic means.
inline MetricAggregates aggregate(const std::vector<FrameError>& errors) {
  MetricAggregates a;
  if (errors.empty()) return a;
  std::size_t cm = 0;
  std::size_t mm = 0;
  for (const auto& e : errors) {
    if (e.rotation_deg <= 5.0 && e.translation_mm <= 50.0) ++cm;
    if (e.rotation_deg <= 5.0 && e.translation_mm <= 5.0) ++mm;
    a.mean_rot_deg += e.rotation_deg;
    a.mean_trans_mm += e.translation_mm;
  }
  const auto n = static_cast<double>(errors.size());
  a.pct_5deg5cm = 100.0 * static_cast<double>(cm) / n;
  a.pct_5deg5mm = 100.0 * static_cast<double>(mm) / n;
  a.mean_rot_deg /= n;
  a.mean_trans_mm /= n;
  return a;
}

inline MetricReport compute_metrics(const std::vector<Pose>& estimates, const std::vector<Pose>& ground_truth) {
  if (estimates.size() != ground_truth.size() || estimates.empty()) {
    throw LengthMismatch(estimates.size(), ground_truth.size());
  }
  MetricReport r;
  r.frames.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) r.frames.push_back(pose_error(estimates[i], ground_truth[i]));
  r.aggregates = aggregate(r.frames);
  return r;
}

}  // namespace ktrack

#endif  // KTRACK_METRICS_HPP
