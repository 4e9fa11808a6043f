#include "pasdf/bench.hpp"

#include <chrono>
#include <cstdio>
#include <numbers>
#include <random>

#include "pasdf/anomaly.hpp"
#include "pasdf/io.hpp"
#include "pasdf/repair.hpp"
#include "pasdf/sampling.hpp"

namespace pasdf {

using nlohmann::json;

ShapeSpec bench_shape(ShapeKind kind) {
  ShapeSpec s;
  s.kind = kind;
  switch (kind) {
    case ShapeKind::sphere:
      s.radius = 0.4;
      s.density = 5;
      break;
    case ShapeKind::box:
      s.extents = Vec3(0.6, 0.4, 0.25);
      break;
    case ShapeKind::torus:
      s.major_radius = 0.3;
      s.radius = 0.1;
      s.density = 8;
      break;
    case ShapeKind::capsule:
      s.radius = 0.15;
      s.length = 0.4;
      s.density = 8;
      break;
  }
  return s;
}

void round_to_f32(SdfModel& model) {
  auto round = [](auto& m) { m = m.template cast<float>().template cast<double>(); };
  for (auto& l : model.layers) {
    round(l.direction);
    round(l.gain);
    round(l.bias);
  }
  model.arch.dropout = static_cast<float>(model.arch.dropout);
}

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string case_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "case" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

struct TestCase {
  std::string id;
  std::string kind;
  int label = 0;
  PointCloud cloud;  // posed, raw units, no normals
  std::vector<int> point_labels;
  AnomalySpec anomaly;
  RigidTransform pose;
  bool detect = true;
  bool repair = false;
};

json spec_json(const ShapeSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"radius", s.radius},
          {"major_radius", s.major_radius},
          {"length", s.length},
          {"extents", {s.extents.x(), s.extents.y(), s.extents.z()}},
          {"density", s.density}};
}

json pose_json(const RigidTransform& t) {
  const Eigen::Matrix4d m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

std::vector<double> to_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

BenchRow run_shape(const RunConfig& cfg, ShapeKind kind, const std::filesystem::path& dir, json& manifest,
                   std::ostream* log) {
  const std::uint64_t shape_seed = derive_seed(cfg.seed, "bench/" + to_string(kind));
  const auto& b = cfg.bench;
  Stopwatch clock;
  BenchRow row;
  row.shape = to_string(kind);

  const ShapeSpec spec = bench_shape(kind);
  const TriMesh raw = generate_shape(spec);
  const double diag = bounding_box(raw.vertices).diagonal();
  const NormalizedMesh norm = normalize_unit_cube(raw, cfg.sampling.margin);

  const PointCloud canonical =
      sample_surface(norm.mesh, cfg.sampling.canonical_points, derive_seed(shape_seed, "canonical"));
  const PointCloud label_surface =
      sample_surface(norm.mesh, cfg.sampling.label_points, derive_seed(shape_seed, "label"));
  std::vector<QuerySample> queries = sample_queries(norm.mesh, cfg.sampling.counts, derive_seed(shape_seed, "queries"));
  label_queries(queries, label_surface);

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(shape_seed, "train");
  Architecture arch = cfg.model;
  arch.input_dim = cfg.encoding.dim();
  TrainResult trained = train(queries, tc, cfg.encoding, arch);
  SdfModel model = std::move(trained.model);
  round_to_f32(model);
  row.final_loss = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
  if (log) *log << row.shape << ": trained in " << clock.lap() << " s, final loss " << row.final_loss << "\n";

  // Test cases: normals, detectable anomalies, then repair-only crops.
  std::vector<TestCase> cases;
  const std::size_t total = b.n_normal + b.n_anomalous + b.crop_cases;
  for (std::size_t c = 0; c < total; ++c) {
    const std::uint64_t cs = derive_seed(shape_seed, "case" + std::to_string(c));
    TestCase tcse;
    tcse.id = case_id(c);
    PointCloud base = sample_surface(raw, b.cloud_points, derive_seed(cs, "sample"));
    tcse.point_labels.assign(base.size(), 0);
    tcse.kind = "normal";
    if (c >= b.n_normal) {
      const bool crop = c >= b.n_normal + b.n_anomalous;
      tcse.anomaly.kind = crop ? AnomalyKind::crop : b.anomaly_kinds[(c - b.n_normal) % b.anomaly_kinds.size()];
      std::mt19937_64 pick(derive_seed(cs, "center"));
      tcse.anomaly.center = base.points[std::uniform_int_distribution<std::size_t>(0, base.size() - 1)(pick)];
      tcse.anomaly.radius = b.anomaly_radius * diag;
      tcse.anomaly.magnitude = b.magnitude * diag;
      InjectedAnomaly inj = inject_anomaly(base, tcse.anomaly, derive_seed(cs, "inject"));
      base = std::move(inj.cloud);
      tcse.point_labels = std::move(inj.labels);
      tcse.kind = to_string(tcse.anomaly.kind);
      tcse.label = 1;
      tcse.detect = !crop;
      tcse.repair = crop || tcse.anomaly.kind == AnomalyKind::dent;
    }
    base.normals.clear();
    tcse.pose = random_pose(derive_seed(cs, "pose"), b.max_rotation_deg * std::numbers::pi / 180.0, b.max_shift * diag);
    tcse.cloud = apply_transform(tcse.pose, base);
    cases.push_back(std::move(tcse));
  }

  std::vector<AnomalyReport> reports, reports_no_pam;
  std::vector<int> object_labels;
  std::vector<std::vector<int>> point_labels;
  std::vector<double> input_scores(cases.size(), 0.0);
  const ScoreOptions no_pam{false};
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const TestCase& t = cases[c];
    const std::uint64_t cs = derive_seed(shape_seed, "case" + std::to_string(c));
    const PointCloud test = norm.record.normalize(t.cloud);
    AnomalyReport rep = detect(model, cfg.encoding, test, canonical, cfg.pam, cfg.scoring.top_k,
                               derive_seed(cs, "detect"));
    input_scores[c] = rep.object_score;
    if (!t.detect) continue;
    BenchCase bc{t.id, t.kind, t.label, rep.object_score, 0.0, rep.converged};
    if (b.pam_ablation) {
      AnomalyReport raw_rep = detect(model, cfg.encoding, test, canonical, cfg.pam, cfg.scoring.top_k, 0, no_pam);
      bc.object_score_no_pam = raw_rep.object_score;
      reports_no_pam.push_back(std::move(raw_rep));
    }
    row.converged += rep.converged ? 1 : 0;
    row.detection.push_back(bc);
    if (!dir.empty()) {
      io::write_ply(dir / "scores" / (t.id + ".ply"), t.cloud,
                    {{"anomaly_score", rep.per_point_scores}, {"label", to_double(t.point_labels)}});
    }
    reports.push_back(std::move(rep));
    object_labels.push_back(t.label);
    point_labels.push_back(t.point_labels);
  }
  row.cases = reports.size();
  const DetectionMetrics m = evaluate(reports, object_labels, point_labels);
  row.o_auroc = m.o_auroc;
  row.p_auroc = m.p_auroc;
  if (b.pam_ablation) {
    const DetectionMetrics m0 = evaluate(reports_no_pam, object_labels, point_labels);
    row.o_auroc_no_pam = m0.o_auroc;
    row.p_auroc_no_pam = m0.p_auroc;
  }
  if (log) *log << row.shape << ": detection in " << clock.lap() << " s\n";

  if (b.run_repair) {
    const PointCloud reference =
        sample_surface(norm.mesh, b.reference_points, derive_seed(shape_seed, "reference"));
    RepairOptions opts{cfg.grid.resolution, cfg.grid.expand, cfg.grid.clip_unit_cube, cfg.repair.n_points};
    for (std::size_t c = 0; c < cases.size(); ++c) {
      const TestCase& t = cases[c];
      if (!t.repair) continue;
      const std::uint64_t cs = derive_seed(shape_seed, "case" + std::to_string(c));
      const PointCloud test = norm.record.normalize(t.cloud);
      const RepairResult r = repair(test, model, cfg.encoding, canonical, opts, cfg.pam, derive_seed(cs, "repair"));
      const RepairQuality q = repair_quality(r.repaired, reference, cfg.repair.emd_subsample, derive_seed(cs, "quality"));
      const AnomalyReport again = detect(model, cfg.encoding, r.repaired, canonical, cfg.pam, cfg.scoring.top_k,
                                         derive_seed(cs, "redetect"));
      RepairCase rc;
      rc.id = t.id;
      rc.kind = t.kind;
      rc.converged = r.converged;
      rc.cd_input = chamfer_metric(r.aligned_input, reference);
      rc.cd_repaired = q.cd;
      rc.cd_per_point = q.cd_per_point;
      rc.emd_per_point = q.emd_per_point;
      rc.score_input = input_scores[c];
      rc.score_repaired = again.object_score;
      row.repairs.push_back(rc);
      if (!dir.empty()) {
        io::write_ply(dir / "repaired" / (t.id + ".ply"), r.repaired);
        io::write_obj(dir / "repaired" / (t.id + ".obj"), r.mesh);
      }
    }
    for (const auto& rc : row.repairs) {
      row.cd += rc.cd_repaired;
      row.cd_per_point += rc.cd_per_point;
      row.emd_per_point += rc.emd_per_point;
    }
    if (!row.repairs.empty()) {
      const auto n = static_cast<double>(row.repairs.size());
      row.cd /= n;
      row.cd_per_point /= n;
      row.emd_per_point /= n;
    }
    if (log) *log << row.shape << ": repair in " << clock.lap() << " s\n";
  }

  json entry = {{"shape", spec_json(spec)}, {"seed", shape_seed}, {"cases", json::array()}};
  for (const auto& t : cases) {
    json cj = {{"id", t.id}, {"kind", t.kind}, {"label", t.label}, {"pose", pose_json(t.pose)}};
    if (t.label == 1) {
      cj["anomaly"] = {{"kind", to_string(t.anomaly.kind)},
                       {"center", {t.anomaly.center.x(), t.anomaly.center.y(), t.anomaly.center.z()}},
                       {"radius", t.anomaly.radius},
                       {"magnitude", t.anomaly.magnitude}};
    }
    if (!dir.empty()) {
      const auto path = dir / "clouds" / (t.id + ".ply");
      io::write_ply(path, t.cloud, {{"label", to_double(t.point_labels)}});
      cj["path"] = std::filesystem::relative(path, dir.parent_path()).generic_string();
    }
    entry["cases"].push_back(cj);
  }
  if (!dir.empty()) {
    save_checkpoint(dir / "model.ckpt", model);
    io::write_ply(dir / "canonical.ply", canonical);
  }
  manifest["shapes"].push_back(entry);
  return row;
}

json row_json(const BenchRow& r) {
  json j = {{"shape", r.shape}, {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
    return j;
  }
  j.update({{"final_loss", r.final_loss},
            {"o_auroc", r.o_auroc},
            {"p_auroc", r.p_auroc},
            {"o_auroc_no_pam", r.o_auroc_no_pam},
            {"p_auroc_no_pam", r.p_auroc_no_pam},
            {"converged", r.converged},
            {"cases", r.cases},
            {"cd", r.cd},
            {"cd_per_point", r.cd_per_point},
            {"emd_per_point", r.emd_per_point}});
  j["detection"] = json::array();
  for (const auto& c : r.detection) {
    j["detection"].push_back({{"id", c.id},
                              {"kind", c.kind},
                              {"label", c.label},
                              {"object_score", c.object_score},
                              {"object_score_no_pam", c.object_score_no_pam},
                              {"converged", c.converged}});
  }
  j["repairs"] = json::array();
  for (const auto& c : r.repairs) {
    j["repairs"].push_back({{"id", c.id},
                            {"kind", c.kind},
                            {"converged", c.converged},
                            {"cd_input", c.cd_input},
                            {"cd_repaired", c.cd_repaired},
                            {"cd_per_point", c.cd_per_point},
                            {"emd_per_point", c.emd_per_point},
                            {"score_input", c.score_input},
                            {"score_repaired", c.score_repaired}});
  }
  return j;
}

}  // namespace

std::string format_metrics_table(const std::vector<BenchRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %8s %8s %8s %8s %12s %12s %10s %6s\n", "shape", "O-AUROC", "P-AUROC",
                "O(noPAM)", "P(noPAM)", "CD", "CD/pt", "EMD/pt", "conv");
  out += line;
  for (const auto& r : rows) {
    if (r.failed) {
      std::snprintf(line, sizeof(line), "%-8s FAILED: %s\n", r.shape.c_str(), r.error.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-8s %8.4f %8.4f %8.4f %8.4f %12.6e %12.6e %10.6f %3zu/%zu\n",
                    r.shape.c_str(), r.o_auroc, r.p_auroc, r.o_auroc_no_pam, r.p_auroc_no_pam, r.cd, r.cd_per_point,
                    r.emd_per_point, r.converged, r.cases);
    }
    out += line;
  }
  return out;
}

BenchResult run_bench(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream* log) {
  cfg.validate();
  BenchResult result;
  json manifest = {{"seed", cfg.seed}, {"config", to_json(cfg)}, {"shapes", json::array()}};
  for (ShapeKind kind : cfg.bench.shapes) {
    const auto dir = out_dir.empty() ? std::filesystem::path{} : out_dir / to_string(kind);
    try {
      result.rows.push_back(run_shape(cfg, kind, dir, manifest, log));
    } catch (const Error& e) {
      BenchRow failed;
      failed.shape = to_string(kind);
      failed.failed = true;
      failed.error = e.what();
      result.rows.push_back(failed);
      if (log) *log << failed.shape << ": failed: " << e.what() << "\n";
    }
  }
  result.table = format_metrics_table(result.rows);
  result.summary = {{"seed", cfg.seed}, {"rows", json::array()}};
  for (const auto& r : result.rows) result.summary["rows"].push_back(row_json(r));
  if (!out_dir.empty()) {
    io::write_text(out_dir / "metrics.txt", result.table);
    io::write_text(out_dir / "summary.json", result.summary.dump(2) + "\n");
    io::write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace pasdf
