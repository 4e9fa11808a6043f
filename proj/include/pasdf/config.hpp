#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pasdf/pam.hpp"
#include "pasdf/sampling.hpp"
#include "pasdf/sdf_model.hpp"
#include "pasdf/synth.hpp"

namespace pasdf {

struct SamplingConfig {
  QueryCounts counts;
  double margin = 0.05;              // normalization margin inside the unit cube
  std::size_t label_points = 20000;  // dense surface samples used to label query SDFs
  std::size_t canonical_points = 4000;
};

struct GridConfig {
  std::size_t resolution = 128;
  double expand = 1.3;
  bool clip_unit_cube = true;
};

struct ScoringConfig {
  std::size_t top_k = 1000;
  bool use_pam = true;
};

struct RepairConfig {
  std::size_t n_points = 0;  // 0: match the input cloud size
  std::size_t emd_subsample = 512;
};

struct BenchConfig {
  std::vector<ShapeKind> shapes{ShapeKind::sphere, ShapeKind::box, ShapeKind::torus, ShapeKind::capsule};
  std::size_t n_normal = 10;
  std::size_t n_anomalous = 10;
  std::size_t cloud_points = 2000;
  std::vector<AnomalyKind> anomaly_kinds{AnomalyKind::dent, AnomalyKind::bulge, AnomalyKind::noise_patch};
  double magnitude = 0.05;      // fraction of the shape bbox diagonal
  double anomaly_radius = 0.15; // fraction of the shape bbox diagonal
  std::size_t crop_cases = 2;   // extra cropped cases per shape, repair only
  double max_rotation_deg = 180.0;
  double max_shift = 0.5;       // fraction of the shape bbox diagonal
  bool pam_ablation = true;     // also score every case without alignment
  bool run_repair = true;
  std::size_t reference_points = 10000;
};

struct InputsConfig {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::string reference;     // optional ground-truth normal shape for repair quality
  std::string canonical_id;  // default: lexicographically first training id
  std::string work_dir = "pasdf_out";
};

struct RunConfig {
  std::uint64_t seed = 0;
  PamParams pam;
  EncodingConfig encoding;
  Architecture model;
  TrainConfig train;  // seed is derived from the root seed, not serialized
  SamplingConfig sampling;
  GridConfig grid;
  ScoringConfig scoring;
  RepairConfig repair;
  BenchConfig bench;
  InputsConfig inputs;

  /// Range checks of every section; throws InvalidParameter.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their values from `base`; unknown keys and wrong types throw InvalidParameter.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

/// Reduced settings that fit a single desktop core: width-64 network without dropout, 300 epochs.
RunConfig desk_config();

}  // namespace pasdf
