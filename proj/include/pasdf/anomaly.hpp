#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pasdf/geom.hpp"
#include "pasdf/pam.hpp"
#include "pasdf/sdf_model.hpp"

namespace pasdf {

struct AnomalyReport {
  std::vector<double> per_point_scores;  // index-aligned with the input cloud
  double object_score = 0.0;
  std::size_t k_used = 0;
  RigidTransform transform;  // input frame -> canonical frame
  bool converged = false;
  double final_chamfer = 0.0;
};

struct ScoreOptions {
  bool use_pam = true;  // false: score the cloud as given (identity alignment, reported converged)
};

/// |f(x)| for every point after aligning `test` onto `canonical`. object_score is left at 0.
AnomalyReport score_points(const SdfModel& model, const EncodingConfig& enc, const PointCloud& test,
                           const PointCloud& canonical, const PamParams& pam, std::uint64_t seed,
                           const ScoreOptions& options = {});

/// Mean of the min(k, n) largest scores.
double object_score(std::span<const double> scores, std::size_t k);

/// score_points followed by object_score with top-k.
AnomalyReport detect(const SdfModel& model, const EncodingConfig& enc, const PointCloud& test,
                     const PointCloud& canonical, const PamParams& pam, std::size_t top_k, std::uint64_t seed,
                     const ScoreOptions& options = {});

/// Mann-Whitney AUROC with midranks: P(anomalous > normal) + 0.5 P(tie).
/// Throws UndefinedMetric unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct DetectionMetrics {
  double o_auroc = 0.0;
  double p_auroc = 0.0;
};

/// O-AUROC over object scores; P-AUROC over all per-point scores pooled across reports.
DetectionMetrics evaluate(std::span<const AnomalyReport> reports, std::span<const int> object_labels,
                          std::span<const std::vector<int>> point_labels);

}  // namespace pasdf
