#include "pasdf/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace pasdf {

AnomalyReport score_points(const SdfModel& model, const EncodingConfig& enc, const PointCloud& test,
                           const PointCloud& canonical, const PamParams& pam, std::uint64_t seed,
                           const ScoreOptions& options) {
  require_non_empty(test, "score_points");
  AnomalyReport report;
  const PointCloud* aligned = &test;
  AlignmentResult alignment;
  if (options.use_pam) {
    require_non_empty(canonical, "score_points canonical");
    alignment = pose_align(test, canonical, pam, seed);
    report.transform = alignment.cumulative;
    report.converged = alignment.converged;
    report.final_chamfer = alignment.final_chamfer;
    aligned = &alignment.aligned;
  } else {
    report.converged = true;
  }
  report.per_point_scores = evaluate_sdf(model, enc, aligned->points);
  for (double& s : report.per_point_scores) s = std::abs(s);
  return report;
}

double object_score(std::span<const double> scores, std::size_t k) {
  if (scores.empty()) throw InvalidInput("object_score: no scores");
  if (k < 1) throw InvalidParameter("object_score: k must be >= 1");
  const std::size_t kk = std::min(k, scores.size());
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kk - 1), sorted.end(),
                   std::greater<>());
  std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kk), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < kk; ++i) sum += sorted[i];
  return sum / static_cast<double>(kk);
}

AnomalyReport detect(const SdfModel& model, const EncodingConfig& enc, const PointCloud& test,
                     const PointCloud& canonical, const PamParams& pam, std::size_t top_k, std::uint64_t seed,
                     const ScoreOptions& options) {
  AnomalyReport r = score_points(model, enc, test, canonical, pam, seed, options);
  r.k_used = std::min(top_k, r.per_point_scores.size());
  r.object_score = object_score(r.per_point_scores, top_k);
  return r;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("auroc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidInput("auroc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auroc: both classes must be present");
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidInput("auroc: NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) pos_in_group += static_cast<std::size_t>(labels[order[j++]]);
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

DetectionMetrics evaluate(std::span<const AnomalyReport> reports, std::span<const int> object_labels,
                          std::span<const std::vector<int>> point_labels) {
  if (reports.size() != object_labels.size() || reports.size() != point_labels.size()) {
    throw InvalidInput("evaluate: reports and labels differ in count");
  }
  std::vector<double> objects, points;
  std::vector<int> point_flat;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    objects.push_back(reports[i].object_score);
    if (point_labels[i].size() != reports[i].per_point_scores.size()) {
      throw InvalidInput("evaluate: point labels of report " + std::to_string(i) + " do not match its scores");
    }
    points.insert(points.end(), reports[i].per_point_scores.begin(), reports[i].per_point_scores.end());
    point_flat.insert(point_flat.end(), point_labels[i].begin(), point_labels[i].end());
  }
  return {auroc(objects, object_labels), auroc(points, point_flat)};
}

}  // namespace pasdf
