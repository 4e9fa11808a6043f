#include <doctest.h>

#include <fstream>

#include "pasdf/config.hpp"
#include "support.hpp"

using namespace pasdf;
using nlohmann::json;

namespace {

RunConfig unusual() {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.pam.tau = 0.0123456789;
  c.pam.k_max = 4;
  c.encoding.num_frequencies = 3;
  c.encoding.include_input = false;
  c.model.hidden_width = 48;
  c.model.dropout = 0.1;
  c.train.learning_rate = 3.3e-4;
  c.train.clamp_target = true;
  c.sampling.counts.n_bbox = 17;
  c.sampling.margin = 0.1;
  c.grid.resolution = 40;
  c.scoring.use_pam = false;
  c.repair.emd_subsample = 64;
  c.bench.shapes = {ShapeKind::torus, ShapeKind::box};
  c.bench.anomaly_kinds = {AnomalyKind::crop};
  c.bench.max_rotation_deg = 33.0;
  c.inputs.train = {"a.ply", "b.obj"};
  c.inputs.test = {"t.ply"};
  c.inputs.canonical_id = "b";
  c.inputs.work_dir = "w";
  return c;
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.pam.tau == 0.016);
  CHECK(c.pam.delta_tau == 0.001);
  CHECK(c.pam.k_max == 10);
  CHECK(c.train.d_max == 0.1);
  CHECK(c.train.learning_rate == 1e-5);
  CHECK(c.train.epochs == 2000);
  CHECK(c.scoring.top_k == 1000);
  CHECK(c.sampling.counts.n_surface == 10000);
  CHECK(c.sampling.counts.n_bbox == 10000);
  CHECK(c.sampling.counts.n_volume == 3000);
  CHECK(c.sampling.counts.bbox_expand == 1.3);
  CHECK(c.model.num_layers == 8);
  CHECK(c.model.skip_layer == 4);
  CHECK(c.model.dropout == 0.2);
  CHECK_NOTHROW(c.validate());

  const RunConfig d = desk_config();
  CHECK(d.model.hidden_width == 64);
  CHECK(d.train.epochs == 300);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("json round trip") {
  for (const RunConfig& c : {RunConfig{}, desk_config(), unusual()}) {
    const json j = to_json(c);
    const RunConfig back = config_from_json(j);
    CHECK(to_json(back).dump() == j.dump());
  }
  const RunConfig back = config_from_json(to_json(unusual()));
  CHECK(back.seed == 123456789012345ULL);
  CHECK(back.pam.tau == 0.0123456789);
  CHECK(back.bench.shapes == std::vector<ShapeKind>{ShapeKind::torus, ShapeKind::box});
  CHECK(back.inputs.train == std::vector<std::string>{"a.ply", "b.obj"});
}

TEST_CASE("partial documents keep the base values") {
  const RunConfig base = desk_config();
  const RunConfig c = config_from_json(json::parse(R"({"seed": 7, "pam": {"tau": 0.02}})"), base);
  CHECK(c.seed == 7);
  CHECK(c.pam.tau == 0.02);
  CHECK(c.pam.k_max == base.pam.k_max);
  CHECK(c.model.hidden_width == 64);
  CHECK(config_from_json(json::object()).train.epochs == 2000);
}

TEST_CASE("strict parsing") {
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sede": 1})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"pam": {"taux": 1}})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"pam": {"tau": "big"}})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"grid": {"resolution": -4}})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"pam": 3})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"bench": {"shapes": ["cone"]}})")), InvalidParameter);
  CHECK_THROWS_AS(config_from_json(json::parse("[1, 2]")), InvalidParameter);

  const std::filesystem::path dir = pasdf::test::temp_dir("config_files");
  CHECK_THROWS_AS(load_config(dir / "absent.json"), IoError);
  std::ofstream(dir / "broken.json") << "{\"seed\": ";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), InvalidParameter);
  std::ofstream(dir / "ok.json") << "{\"train\": {\"epochs\": 5}}";
  CHECK(load_config(dir / "ok.json", desk_config()).train.epochs == 5);
}

TEST_CASE("validation") {
  const auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
  };
  invalid([](RunConfig& c) { c.grid.resolution = 0; });
  invalid([](RunConfig& c) { c.grid.resolution = 7; });
  invalid([](RunConfig& c) { c.pam.tau = 0.0; });
  invalid([](RunConfig& c) { c.pam.k_max = 0; });
  invalid([](RunConfig& c) { c.train.d_max = -0.1; });
  invalid([](RunConfig& c) { c.train.learning_rate = 0.0; });
  invalid([](RunConfig& c) { c.model.dropout = 1.0; });
  invalid([](RunConfig& c) { c.scoring.top_k = 0; });
  invalid([](RunConfig& c) { c.bench.max_rotation_deg = 181.0; });
  invalid([](RunConfig& c) { c.sampling.margin = 0.5; });
}
