#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pasdf/commands.hpp"
#include "pasdf/common.hpp"
#include "pasdf/config.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kNumericFailure = 3,
  kArtifactMismatch = 4,
  kValidationError = 5,
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string canonical;
  std::string out;
  bool desk = false;
};

pasdf::RunConfig resolve(const Options& o) {
  pasdf::RunConfig base = o.desk ? pasdf::desk_config() : pasdf::RunConfig{};
  pasdf::RunConfig cfg = o.config.empty() ? base : pasdf::load_config(o.config, base);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.canonical.empty()) cfg.inputs.canonical_id = o.canonical;
  if (!o.out.empty()) cfg.inputs.work_dir = o.out;
  cfg.validate();
  return cfg;
}

int run(const std::string& command, const Options& o) {
  const pasdf::RunConfig cfg = resolve(o);
  const std::filesystem::path out = cfg.inputs.work_dir;
  if (command == "prepare") pasdf::cmd_prepare(cfg, out, std::cerr);
  else if (command == "train") pasdf::cmd_train(cfg, out, std::cerr);
  else if (command == "detect") pasdf::cmd_detect(cfg, out, std::cerr);
  else if (command == "repair") pasdf::cmd_repair(cfg, out, std::cerr);
  else if (command == "eval") pasdf::cmd_eval(cfg, out, std::cerr);
  else if (command == "bench") std::cout << pasdf::cmd_bench(cfg, out, std::cerr).table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose-aligned signed-distance anomaly detection and repair for point clouds"};
  app.require_subcommand(1, 1);

  Options opts;
  const char* commands[][2] = {
      {"prepare", "normalize training shapes, align them to the canonical sample and label query points"},
      {"train", "fit the signed-distance network to the prepared samples"},
      {"detect", "align test clouds and write per-point anomaly score maps"},
      {"repair", "extract the learned surface around each test cloud and resample it"},
      {"eval", "recompute detection metrics from a results directory"},
      {"bench", "run the synthetic benchmark end to end"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "root seed (overrides the config)");
    sub->add_option("--canonical", opts.canonical, "training id used as the canonical pose");
    sub->add_option("--out", opts.out, "work directory (overrides inputs.work_dir)");
    sub->add_flag("--desk", opts.desk, "start from the reduced single-core settings");
    sub->callback([&chosen, n = std::string(name)] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const std::string what = e.what();
    std::cerr << "pasdf: " << what << "\n";
    if (what.find("File does not exist") != std::string::npos) return kInputError;
    return kValidationError;
  }

  try {
    return run(chosen, opts);
  } catch (const pasdf::InvalidInput& e) {
    std::cerr << "pasdf: input error: " << e.what() << "\n";
    return kInputError;
  } catch (const pasdf::IoError& e) {
    std::cerr << "pasdf: input error: " << e.what() << "\n";
    return kInputError;
  } catch (const pasdf::ArtifactMismatch& e) {
    std::cerr << "pasdf: artifact mismatch: " << e.what() << "\n";
    return kArtifactMismatch;
  } catch (const pasdf::InvalidParameter& e) {
    std::cerr << "pasdf: invalid configuration: " << e.what() << "\n";
    return kValidationError;
  } catch (const pasdf::Error& e) {
    // NumericFailure, RepairFailed, CoarseAlignmentFailed, UndefinedMetric
    std::cerr << "pasdf: numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::exception& e) {
    std::cerr << "pasdf: " << e.what() << "\n";
    return kNumericFailure;
  }
}
