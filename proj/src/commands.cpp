#include "pasdf/commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "pasdf/anomaly.hpp"
#include "pasdf/io.hpp"
#include "pasdf/repair.hpp"

namespace pasdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json record_json(const NormalizationRecord& r) {
  return {{"scale", r.scale}, {"offset", {r.offset.x(), r.offset.y(), r.offset.z()}}};
}

NormalizationRecord record_from_json(const json& j) {
  try {
    NormalizationRecord r;
    r.scale = j.at("scale").get<double>();
    const auto o = j.at("offset").get<std::vector<double>>();
    if (o.size() != 3 || !(r.scale > 0.0)) throw ArtifactMismatch("normalization record is malformed");
    r.offset = Vec3(o[0], o[1], o[2]);
    return r;
  } catch (const json::exception& e) {
    throw ArtifactMismatch(std::string("normalization record: ") + e.what());
  }
}

json matrix_json(const RigidTransform& t) {
  const Eigen::Matrix4d m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact " + path.string() + " (run the earlier stage first)");
  try {
    return json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ArtifactMismatch(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

std::string stem_id(const std::string& path) { return fs::path(path).stem().string(); }

/// Outward-oriented PCA normals for a cloud that arrived without them.
PointCloud with_normals(const PointCloud& cloud, std::size_t k) {
  if (cloud.has_normals()) return cloud;
  const Vec3 c = centroid(cloud.points);
  PointCloud out = estimate_normals(cloud, std::min(k, cloud.size()), c).cloud;
  for (auto& n : out.normals) n = -n;
  return out;
}

struct Loaded {
  std::string id;
  std::string path;
  io::Geometry geometry;
};

std::vector<Loaded> load_all(const std::vector<std::string>& paths, std::ostream& log) {
  std::vector<Loaded> out;
  std::ostringstream failures;
  std::size_t failed = 0;
  for (const auto& p : paths) {
    try {
      out.push_back({stem_id(p), p, io::read_geometry(p)});
    } catch (const Error& e) {
      log << "error: " << e.what() << "\n";
      failures << (failed++ ? "; " : "") << e.what();
    }
  }
  if (failed > 0) throw IoError(std::to_string(failed) + " input file(s) could not be read: " + failures.str());
  return out;
}

struct Artifacts {
  NormalizationRecord record;
  PointCloud canonical;
  SdfModel model;
  EncodingConfig encoding;
};

Artifacts load_artifacts(const RunConfig& cfg, const WorkDir& wd) {
  Artifacts a;
  const json prep = read_json(wd.prepare_meta());
  a.record = record_from_json(prep.at("normalization"));
  a.canonical = io::read_geometry(wd.canonical()).cloud;
  const json meta = read_json(wd.model_meta());
  try {
    a.encoding.num_frequencies = meta.at("encoding").at("num_frequencies").get<std::size_t>();
    a.encoding.include_input = meta.at("encoding").at("include_input").get<bool>();
  } catch (const json::exception& e) {
    throw ArtifactMismatch(std::string("model metadata: ") + e.what());
  }
  if (a.encoding.num_frequencies != cfg.encoding.num_frequencies ||
      a.encoding.include_input != cfg.encoding.include_input) {
    throw ArtifactMismatch("checkpoint was trained with a different positional encoding than the config");
  }
  a.model = load_checkpoint(wd.checkpoint());
  Architecture expected = cfg.model;
  expected.input_dim = cfg.encoding.dim();
  const Architecture& got = a.model.arch;
  if (got.input_dim != expected.input_dim || got.hidden_width != expected.hidden_width ||
      got.num_layers != expected.num_layers || got.skip_layer != expected.skip_layer) {
    throw ArtifactMismatch("checkpoint architecture does not match the config");
  }
  return a;
}

std::vector<int> point_labels_of(const io::Geometry& g) {
  auto it = g.vertex_scalars.find("label");
  if (it == g.vertex_scalars.end()) return {};
  std::vector<int> labels;
  for (double v : it->second) labels.push_back(v > 0.5 ? 1 : 0);
  return labels;
}

}  // namespace

void cmd_prepare(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  if (cfg.inputs.train.empty()) throw InvalidParameter("prepare: inputs.train is empty");
  const WorkDir wd{out};
  std::vector<Loaded> samples = load_all(cfg.inputs.train, log);
  std::sort(samples.begin(), samples.end(), [](const Loaded& a, const Loaded& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].id == samples[i - 1].id) throw InvalidParameter("prepare: duplicate training id " + samples[i].id);
  }
  std::size_t canon = 0;
  if (!cfg.inputs.canonical_id.empty()) {
    auto it = std::find_if(samples.begin(), samples.end(), [&](const Loaded& s) { return s.id == cfg.inputs.canonical_id; });
    if (it == samples.end()) throw InvalidParameter("prepare: canonical id '" + cfg.inputs.canonical_id + "' not found");
    canon = static_cast<std::size_t>(it - samples.begin());
  }
  std::rotate(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(canon), samples.begin() + static_cast<std::ptrdiff_t>(canon) + 1);

  const std::uint64_t stage = derive_seed(cfg.seed, "prepare");
  const auto& first = samples.front().geometry;
  const NormalizationRecord record =
      first.mesh ? normalize_unit_cube(*first.mesh, cfg.sampling.margin).record
                 : normalization_for(first.cloud.points, cfg.sampling.margin);

  PointCloud canonical;
  std::vector<QuerySample> pooled;
  json entries = json::array();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Loaded& item = samples[s];
    const std::uint64_t seed = derive_seed(stage, item.id);
    std::optional<TriMesh> mesh;
    PointCloud cloud;
    if (item.geometry.mesh) {
      mesh = *item.geometry.mesh;
      for (auto& v : mesh->vertices) v = record.normalize(v);
      cloud = sample_surface(*mesh, cfg.sampling.canonical_points, derive_seed(seed, "surface"));
    } else {
      cloud = with_normals(record.normalize(item.geometry.cloud), cfg.pam.normal_k);
    }
    json entry = {{"id", item.id}, {"path", item.path}, {"kind", mesh ? "mesh" : "cloud"}};
    if (s == 0) {
      canonical = cloud;
      entry["canonical"] = true;
    } else {
      const AlignmentResult al = pose_align(cloud, canonical, cfg.pam, derive_seed(seed, "align"));
      if (!al.converged) log << "warning: " << item.id << " did not converge to the canonical pose\n";
      cloud = apply_transform(al.cumulative, cloud);
      if (mesh) {
        for (auto& v : mesh->vertices) v = al.cumulative.apply(v);
      }
      entry.update({{"transform", matrix_json(al.cumulative)}, {"chamfer", al.final_chamfer}, {"converged", al.converged}});
    }
    std::vector<QuerySample> q;
    if (mesh) {
      q = sample_queries(*mesh, cfg.sampling.counts, derive_seed(seed, "queries"));
      label_queries(q, sample_surface(*mesh, cfg.sampling.label_points, derive_seed(seed, "label")));
    } else {
      q = sample_queries(cloud, cfg.sampling.counts, derive_seed(seed, "queries"));
      label_queries(q, cloud);
    }
    entry["records"] = q.size();
    pooled.insert(pooled.end(), q.begin(), q.end());
    entries.push_back(entry);
  }

  io::write_query_samples(wd.samples(), pooled);
  io::write_ply(wd.canonical(), canonical);
  write_json(wd.prepare_meta(), {{"canonical_id", samples.front().id},
                                 {"normalization", record_json(record)},
                                 {"records", pooled.size()},
                                 {"seed", cfg.seed},
                                 {"samples", entries}});
  log << "prepared " << pooled.size() << " query samples from " << samples.size() << " training input(s)\n";
}

void cmd_train(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const WorkDir wd{out};
  const json prep = read_json(wd.prepare_meta());
  const std::vector<QuerySample> samples = io::read_query_samples(wd.samples());
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  Architecture arch = cfg.model;
  arch.input_dim = cfg.encoding.dim();
  const TrainResult result = train(samples, tc, cfg.encoding, arch);
  save_checkpoint(wd.checkpoint(), result.model);

  std::ostringstream csv;
  csv.precision(17);
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) csv << e << "," << result.loss_history[e] << "\n";
  io::write_text(wd.loss_csv(), csv.str());

  const json full = to_json(cfg);
  json meta = {{"encoding", full["encoding"]},
               {"model", full["model"]},
               {"train", full["train"]},
               {"normalization", prep.at("normalization")},
               {"epochs_run", result.loss_history.size()}};
  meta["final_loss"] = result.loss_history.empty() ? json(nullptr) : json(result.loss_history.back());
  write_json(wd.model_meta(), meta);
  log << "trained " << result.loss_history.size() << " epoch(s) on " << samples.size() << " samples";
  if (!result.loss_history.empty()) log << ", final loss " << result.loss_history.back();
  log << "\n";
}

void cmd_detect(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const WorkDir wd{out};
  const Artifacts art = load_artifacts(cfg, wd);
  if (cfg.inputs.test.empty()) log << "warning: no test inputs\n";
  const std::vector<Loaded> tests = load_all(cfg.inputs.test, log);
  const std::uint64_t stage = derive_seed(cfg.seed, "detect");
  const ScoreOptions options{cfg.scoring.use_pam};

  json objects = json::array();
  std::vector<AnomalyReport> reports;
  std::vector<int> object_labels;
  std::vector<std::vector<int>> point_labels;
  bool all_labeled = true;
  for (const auto& t : tests) {
    const PointCloud cloud = art.record.normalize(t.geometry.cloud);
    AnomalyReport rep = detect(art.model, art.encoding, cloud, art.canonical, cfg.pam, cfg.scoring.top_k,
                               derive_seed(stage, t.id), options);
    if (!rep.converged) log << "warning: alignment of " << t.id << " did not converge\n";
    io::write_ply(wd.scores_dir() / (t.id + ".ply"), t.geometry.cloud, {{"anomaly_score", rep.per_point_scores}});
    json obj = {{"id", t.id}, {"object_score", rep.object_score}, {"converged", rep.converged}, {"k_used", rep.k_used}};
    std::vector<int> labels = point_labels_of(t.geometry);
    if (!labels.empty() && labels.size() == cloud.size()) {
      const int label = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 1; }) ? 1 : 0;
      obj["label"] = label;
      object_labels.push_back(label);
      point_labels.push_back(std::move(labels));
    } else {
      all_labeled = false;
    }
    objects.push_back(obj);
    reports.push_back(std::move(rep));
  }

  json results = {{"objects", objects}, {"o_auroc", nullptr}, {"p_auroc", nullptr}};
  if (all_labeled && !reports.empty()) {
    try {
      const DetectionMetrics m = evaluate(reports, object_labels, point_labels);
      results["o_auroc"] = m.o_auroc;
      results["p_auroc"] = m.p_auroc;
    } catch (const UndefinedMetric& e) {
      log << "note: " << e.what() << "\n";
    }
  }
  write_json(wd.results(), results);
  log << "scored " << reports.size() << " input(s)\n";
}

void cmd_repair(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const WorkDir wd{out};
  const Artifacts art = load_artifacts(cfg, wd);
  const std::vector<Loaded> tests = load_all(cfg.inputs.test, log);
  std::optional<PointCloud> reference;
  if (!cfg.inputs.reference.empty()) {
    const io::Geometry g = io::read_geometry(cfg.inputs.reference);
    reference = g.mesh ? sample_surface(*g.mesh, cfg.bench.reference_points, derive_seed(cfg.seed, "reference"))
                       : g.cloud;
    *reference = art.record.normalize(*reference);
  }
  const std::uint64_t stage = derive_seed(cfg.seed, "repair");
  const RepairOptions opts{cfg.grid.resolution, cfg.grid.expand, cfg.grid.clip_unit_cube, cfg.repair.n_points};
  json summary = json::array();
  for (const auto& t : tests) {
    json entry = {{"id", t.id}};
    try {
      const PointCloud cloud = art.record.normalize(t.geometry.cloud);
      const RepairResult r = repair(cloud, art.model, art.encoding, art.canonical, opts, cfg.pam, derive_seed(stage, t.id));
      io::write_ply(wd.repaired_dir() / (t.id + ".ply"), art.record.denormalize(r.repaired));
      io::write_obj(wd.repaired_dir() / (t.id + ".obj"), art.record.denormalize(r.mesh));
      entry.update({{"status", "ok"}, {"converged", r.converged}, {"to_input", matrix_json(r.to_input)},
                    {"points", r.repaired.size()}, {"grid_resolution", cfg.grid.resolution}});
      if (reference) {
        const RepairQuality q = repair_quality(r.repaired, *reference, cfg.repair.emd_subsample, derive_seed(stage, t.id + "/quality"));
        const json quality = {{"cd", q.cd},
                              {"cd_per_point", q.cd_per_point},
                              {"emd_per_point", q.emd_per_point},
                              {"subsample", q.subsample},
                              {"seed", q.seed},
                              {"grid_resolution", cfg.grid.resolution},
                              {"cd_input", chamfer_metric(r.aligned_input, *reference)}};
        write_json(wd.repaired_dir() / (t.id + ".json"), quality);
        entry["quality"] = quality;
      }
    } catch (const RepairFailed& e) {
      log << "repair failed for " << t.id << ": " << e.what() << "\n";
      entry.update({{"status", "failed"}, {"error", e.what()}});
    }
    summary.push_back(entry);
  }
  write_json(wd.root / "repair.json", {{"inputs", summary}});
  log << "repaired " << summary.size() << " input(s)\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const WorkDir wd{out};
  const json results = read_json(wd.results());
  std::vector<AnomalyReport> reports;
  std::vector<int> object_labels;
  std::vector<std::vector<int>> point_labels;
  for (const auto& obj : results.at("objects")) {
    const std::string id = obj.at("id").get<std::string>();
    const io::Geometry g = io::read_ply(wd.scores_dir() / (id + ".ply"));
    auto scores = g.vertex_scalars.find("anomaly_score");
    if (scores == g.vertex_scalars.end()) throw ArtifactMismatch("score map of " + id + " has no anomaly_score");
    if (!obj.contains("label")) throw InvalidInput("eval: " + id + " has no label");
    const auto test = std::find_if(cfg.inputs.test.begin(), cfg.inputs.test.end(),
                                   [&](const std::string& p) { return stem_id(p) == id; });
    if (test == cfg.inputs.test.end()) throw InvalidInput("eval: no test input for " + id);
    std::vector<int> labels = point_labels_of(io::read_geometry(*test));
    AnomalyReport r;
    r.per_point_scores = scores->second;
    r.object_score = obj.at("object_score").get<double>();
    reports.push_back(std::move(r));
    object_labels.push_back(obj.at("label").get<int>());
    point_labels.push_back(std::move(labels));
  }
  const DetectionMetrics m = evaluate(reports, object_labels, point_labels);
  write_json(wd.root / "eval.json", {{"o_auroc", m.o_auroc}, {"p_auroc", m.p_auroc}, {"objects", reports.size()}});
  log << "O-AUROC " << m.o_auroc << "  P-AUROC " << m.p_auroc << "\n";
}

BenchResult cmd_bench(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  BenchResult r = run_bench(cfg, out, &log);
  log << r.table;
  return r;
}

}  // namespace pasdf
