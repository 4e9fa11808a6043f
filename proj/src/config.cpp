#include "pasdf/config.hpp"

#include <fstream>
#include <set>

namespace pasdf {

using nlohmann::json;

void RunConfig::validate() const {
  pam.validate();
  model.validate();
  train.validate();
  if (model.input_dim != encoding.dim()) {
    throw InvalidParameter("config: model input_dim does not match the encoding dimension");
  }
  if (sampling.counts.n_volume + sampling.counts.n_bbox + sampling.counts.n_surface == 0) {
    throw InvalidParameter("sampling: at least one query sample is required");
  }
  if (!(sampling.counts.bbox_expand > 0.0)) throw InvalidParameter("sampling: bbox_expand must be positive");
  if (!(sampling.margin >= 0.0 && sampling.margin < 0.5)) throw InvalidParameter("sampling: margin must be in [0, 0.5)");
  if (sampling.label_points < 1) throw InvalidParameter("sampling: label_points must be >= 1");
  if (sampling.canonical_points < 1) throw InvalidParameter("sampling: canonical_points must be >= 1");
  if (grid.resolution < 8) throw InvalidParameter("grid: resolution must be >= 8");
  if (!(grid.expand > 0.0)) throw InvalidParameter("grid: expand must be positive");
  if (scoring.top_k < 1) throw InvalidParameter("scoring: top_k must be >= 1");
  if (repair.emd_subsample < 1) throw InvalidParameter("repair: emd_subsample must be >= 1");
  if (bench.shapes.empty()) throw InvalidParameter("bench: no shapes");
  if (bench.n_normal < 1 || bench.n_anomalous < 1) throw InvalidParameter("bench: need normal and anomalous cases");
  if (bench.cloud_points < 16) throw InvalidParameter("bench: cloud_points must be >= 16");
  if (bench.anomaly_kinds.empty()) throw InvalidParameter("bench: no anomaly kinds");
  if (!(bench.magnitude > 0.0)) throw InvalidParameter("bench: magnitude must be positive");
  if (!(bench.anomaly_radius > 0.0)) throw InvalidParameter("bench: anomaly_radius must be positive");
  if (!(bench.max_rotation_deg >= 0.0 && bench.max_rotation_deg <= 180.0)) {
    throw InvalidParameter("bench: max_rotation_deg must be in [0, 180]");
  }
  if (!(bench.max_shift >= 0.0)) throw InvalidParameter("bench: max_shift must be non-negative");
  if (bench.reference_points < 1) throw InvalidParameter("bench: reference_points must be >= 1");
}

json to_json(const RunConfig& c) {
  json shapes = json::array(), kinds = json::array();
  for (auto s : c.bench.shapes) shapes.push_back(to_string(s));
  for (auto k : c.bench.anomaly_kinds) kinds.push_back(to_string(k));
  return {
      {"seed", c.seed},
      {"pam",
       {{"voxel_size", c.pam.voxel_size},
        {"auto_voxel_divisor", c.pam.auto_voxel_divisor},
        {"tau", c.pam.tau},
        {"delta_tau", c.pam.delta_tau},
        {"k_max", c.pam.k_max},
        {"fpfh_radius_factor", c.pam.fpfh_radius_factor},
        {"ransac_distance_factor", c.pam.ransac_distance_factor},
        {"normal_k", c.pam.normal_k},
        {"ransac_max_iterations", c.pam.ransac_max_iterations},
        {"edge_length_ratio", c.pam.edge_length_ratio},
        {"confidence", c.pam.confidence},
        {"icp_max_iter", c.pam.icp_max_iter},
        {"icp_tol", c.pam.icp_tol},
        {"chamfer_on_downsampled", c.pam.chamfer_on_downsampled}}},
      {"encoding", {{"num_frequencies", c.encoding.num_frequencies}, {"include_input", c.encoding.include_input}}},
      {"model",
       {{"hidden_width", c.model.hidden_width},
        {"num_layers", c.model.num_layers},
        {"skip_layer", c.model.skip_layer},
        {"dropout", c.model.dropout}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"d_max", c.train.d_max},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"clamp_target", c.train.clamp_target}}},
      {"sampling",
       {{"n_volume", c.sampling.counts.n_volume},
        {"n_bbox", c.sampling.counts.n_bbox},
        {"n_surface", c.sampling.counts.n_surface},
        {"bbox_expand", c.sampling.counts.bbox_expand},
        {"margin", c.sampling.margin},
        {"label_points", c.sampling.label_points},
        {"canonical_points", c.sampling.canonical_points}}},
      {"grid", {{"resolution", c.grid.resolution}, {"expand", c.grid.expand}, {"clip_unit_cube", c.grid.clip_unit_cube}}},
      {"scoring", {{"top_k", c.scoring.top_k}, {"use_pam", c.scoring.use_pam}}},
      {"repair", {{"n_points", c.repair.n_points}, {"emd_subsample", c.repair.emd_subsample}}},
      {"bench",
       {{"shapes", shapes},
        {"n_normal", c.bench.n_normal},
        {"n_anomalous", c.bench.n_anomalous},
        {"cloud_points", c.bench.cloud_points},
        {"anomaly_kinds", kinds},
        {"magnitude", c.bench.magnitude},
        {"anomaly_radius", c.bench.anomaly_radius},
        {"crop_cases", c.bench.crop_cases},
        {"max_rotation_deg", c.bench.max_rotation_deg},
        {"max_shift", c.bench.max_shift},
        {"pam_ablation", c.bench.pam_ablation},
        {"run_repair", c.bench.run_repair},
        {"reference_points", c.bench.reference_points}}},
      {"inputs",
       {{"train", c.inputs.train},
        {"test", c.inputs.test},
        {"reference", c.inputs.reference},
        {"canonical_id", c.inputs.canonical_id},
        {"work_dir", c.inputs.work_dir}}},
  };
}

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidParameter("config: '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw InvalidParameter("config: unknown key '" + name_ + "." + key + "'");
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw InvalidParameter("expected a non-negative integer");
      }
      out = it->template get<T>();
    } catch (const std::exception& e) {
      throw InvalidParameter("config: bad value for '" + name_ + "." + key + "': " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig config_from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  Section root(j, "config");
  root.get("seed", c.seed);
  if (const json* s = root.sub("pam")) {
    Section p(*s, "pam");
    p.get("voxel_size", c.pam.voxel_size);
    p.get("auto_voxel_divisor", c.pam.auto_voxel_divisor);
    p.get("tau", c.pam.tau);
    p.get("delta_tau", c.pam.delta_tau);
    p.get("k_max", c.pam.k_max);
    p.get("fpfh_radius_factor", c.pam.fpfh_radius_factor);
    p.get("ransac_distance_factor", c.pam.ransac_distance_factor);
    p.get("normal_k", c.pam.normal_k);
    p.get("ransac_max_iterations", c.pam.ransac_max_iterations);
    p.get("edge_length_ratio", c.pam.edge_length_ratio);
    p.get("confidence", c.pam.confidence);
    p.get("icp_max_iter", c.pam.icp_max_iter);
    p.get("icp_tol", c.pam.icp_tol);
    p.get("chamfer_on_downsampled", c.pam.chamfer_on_downsampled);
  }
  if (const json* s = root.sub("encoding")) {
    Section e(*s, "encoding");
    e.get("num_frequencies", c.encoding.num_frequencies);
    e.get("include_input", c.encoding.include_input);
  }
  if (const json* s = root.sub("model")) {
    Section m(*s, "model");
    m.get("hidden_width", c.model.hidden_width);
    m.get("num_layers", c.model.num_layers);
    m.get("skip_layer", c.model.skip_layer);
    m.get("dropout", c.model.dropout);
  }
  c.model.input_dim = c.encoding.dim();
  if (const json* s = root.sub("train")) {
    Section t(*s, "train");
    t.get("learning_rate", c.train.learning_rate);
    t.get("epochs", c.train.epochs);
    t.get("batch_size", c.train.batch_size);
    t.get("d_max", c.train.d_max);
    t.get("beta1", c.train.beta1);
    t.get("beta2", c.train.beta2);
    t.get("epsilon", c.train.epsilon);
    t.get("clamp_target", c.train.clamp_target);
  }
  if (const json* s = root.sub("sampling")) {
    Section t(*s, "sampling");
    t.get("n_volume", c.sampling.counts.n_volume);
    t.get("n_bbox", c.sampling.counts.n_bbox);
    t.get("n_surface", c.sampling.counts.n_surface);
    t.get("bbox_expand", c.sampling.counts.bbox_expand);
    t.get("margin", c.sampling.margin);
    t.get("label_points", c.sampling.label_points);
    t.get("canonical_points", c.sampling.canonical_points);
  }
  if (const json* s = root.sub("grid")) {
    Section g(*s, "grid");
    g.get("resolution", c.grid.resolution);
    g.get("expand", c.grid.expand);
    g.get("clip_unit_cube", c.grid.clip_unit_cube);
  }
  if (const json* s = root.sub("scoring")) {
    Section g(*s, "scoring");
    g.get("top_k", c.scoring.top_k);
    g.get("use_pam", c.scoring.use_pam);
  }
  if (const json* s = root.sub("repair")) {
    Section g(*s, "repair");
    g.get("n_points", c.repair.n_points);
    g.get("emd_subsample", c.repair.emd_subsample);
  }
  if (const json* s = root.sub("bench")) {
    Section b(*s, "bench");
    std::vector<std::string> shapes, kinds;
    b.get("shapes", shapes);
    b.get("anomaly_kinds", kinds);
    if (b.sub("shapes")) {
      c.bench.shapes.clear();
      for (const auto& n : shapes) c.bench.shapes.push_back(shape_kind_from_string(n));
    }
    if (b.sub("anomaly_kinds")) {
      c.bench.anomaly_kinds.clear();
      for (const auto& n : kinds) c.bench.anomaly_kinds.push_back(anomaly_kind_from_string(n));
    }
    b.get("n_normal", c.bench.n_normal);
    b.get("n_anomalous", c.bench.n_anomalous);
    b.get("cloud_points", c.bench.cloud_points);
    b.get("magnitude", c.bench.magnitude);
    b.get("anomaly_radius", c.bench.anomaly_radius);
    b.get("crop_cases", c.bench.crop_cases);
    b.get("max_rotation_deg", c.bench.max_rotation_deg);
    b.get("max_shift", c.bench.max_shift);
    b.get("pam_ablation", c.bench.pam_ablation);
    b.get("run_repair", c.bench.run_repair);
    b.get("reference_points", c.bench.reference_points);
  }
  if (const json* s = root.sub("inputs")) {
    Section in(*s, "inputs");
    in.get("train", c.inputs.train);
    in.get("test", c.inputs.test);
    in.get("reference", c.inputs.reference);
    in.get("canonical_id", c.inputs.canonical_id);
    in.get("work_dir", c.inputs.work_dir);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidParameter("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, base);
}

RunConfig desk_config() {
  RunConfig c;
  c.model.hidden_width = 64;
  c.model.dropout = 0.0;
  c.train.epochs = 300;
  c.train.learning_rate = 1e-3;
  c.sampling.margin = 0.1;
  return c;
}

}  // namespace pasdf
