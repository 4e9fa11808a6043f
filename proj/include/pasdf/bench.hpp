#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pasdf/config.hpp"

namespace pasdf {

struct BenchCase {
  std::string id;
  std::string kind;  // "normal" or the anomaly kind
  int label = 0;
  double object_score = 0.0;
  double object_score_no_pam = 0.0;
  bool converged = false;
};

struct RepairCase {
  std::string id;
  std::string kind;
  bool converged = false;
  double cd_input = 0.0;     // summed chamfer of the aligned input to the normal reference
  double cd_repaired = 0.0;  // same for the repaired cloud
  double cd_per_point = 0.0;
  double emd_per_point = 0.0;
  double score_input = 0.0;
  double score_repaired = 0.0;
};

struct BenchRow {
  std::string shape;
  bool failed = false;
  std::string error;
  double final_loss = 0.0;
  double o_auroc = 0.0;
  double p_auroc = 0.0;
  double o_auroc_no_pam = 0.0;
  double p_auroc_no_pam = 0.0;
  std::size_t converged = 0;
  std::size_t cases = 0;
  double cd = 0.0;  // means over repair cases
  double cd_per_point = 0.0;
  double emd_per_point = 0.0;
  std::vector<BenchCase> detection;
  std::vector<RepairCase> repairs;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::string table;  // deterministic metrics table
  nlohmann::json summary;
};

/// Canonical parameters of each benchmark shape.
ShapeSpec bench_shape(ShapeKind kind);

/// Rounds every parameter through float, matching a checkpoint round trip.
void round_to_f32(SdfModel& model);

/// Generates shapes and labeled test cases, trains one model per shape, detects with and
/// without alignment and repairs dented/cropped cases. With a non-empty `out_dir` the
/// assets, metrics.txt, summary.json and manifest.json are written there; wall-clock
/// timings go to `log` only.
BenchResult run_bench(const RunConfig& cfg, const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

std::string format_metrics_table(const std::vector<BenchRow>& rows);

}  // namespace pasdf
