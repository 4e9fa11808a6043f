#pragma once

#include <filesystem>
#include <ostream>

#include "pasdf/bench.hpp"
#include "pasdf/config.hpp"

namespace pasdf {

/// Output locations of the pipeline stages inside a work directory.
struct WorkDir {
  std::filesystem::path root;

  std::filesystem::path samples() const { return root / "samples.bin"; }
  std::filesystem::path prepare_meta() const { return root / "prepare.json"; }
  std::filesystem::path canonical() const { return root / "canonical.ply"; }
  std::filesystem::path checkpoint() const { return root / "model.ckpt"; }
  std::filesystem::path model_meta() const { return root / "model.json"; }
  std::filesystem::path loss_csv() const { return root / "loss.csv"; }
  std::filesystem::path results() const { return root / "results.json"; }
  std::filesystem::path scores_dir() const { return root / "scores"; }
  std::filesystem::path repaired_dir() const { return root / "repaired"; }
};

/// Each command validates the config first and writes only below `out`. Messages about
/// skipped inputs go to `log`.
void cmd_prepare(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_detect(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_repair(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
BenchResult cmd_bench(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

}  // namespace pasdf
