#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pasdf/common.hpp"
#include "pasdf/sampling.hpp"

namespace pasdf {

struct EncodingConfig {
  std::size_t num_frequencies = 6;
  bool include_input = true;

  std::size_t dim() const { return (include_input ? 3 : 0) + 6 * num_frequencies; }
};

/// [x; sin(2^0 pi x); cos(2^0 pi x); ...; sin(2^(L-1) pi x); cos(2^(L-1) pi x)], componentwise.
Eigen::VectorXd positional_encode(const Vec3& x, const EncodingConfig& cfg);
/// Column-per-point encoding, dim() x n.
Eigen::MatrixXd positional_encode(std::span<const Vec3> xs, const EncodingConfig& cfg);

struct Architecture {
  std::size_t input_dim = 39;
  std::size_t hidden_width = 512;
  std::size_t num_layers = 8;
  std::size_t skip_layer = 4;  // 1-based layer whose input gets the encoded input appended; 0 disables
  double dropout = 0.2;

  void validate() const;
  bool has_skip_at(std::size_t layer) const;  // 0-based layer index
  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  bool operator==(const Architecture&) const = default;
};

/// Weight-normalized affine layer: effective W = diag(gain) * direction / rownorm(direction).
struct Layer {
  Eigen::MatrixXd direction;
  Eigen::VectorXd gain;
  Eigen::VectorXd bias;

  Eigen::MatrixXd effective_weight() const;
};

class SdfModel {
 public:
  Architecture arch;
  std::vector<Layer> layers;
  bool training = false;

  /// Gaussian directions with std 1/sqrt(fan_in), gains = initial row norms, zero biases.
  static SdfModel initialize(const Architecture& arch, std::uint64_t seed);
  /// Zero effective weights and biases (unit-row directions, zero gains).
  static SdfModel zeros(const Architecture& arch);

  std::size_t parameter_count() const;
  /// Throws InvalidInput if layer shapes disagree with the architecture or row norms vanish.
  void validate() const;
};

/// Per-layer tensors shaped like the model parameters.
struct LayerGradient {
  Eigen::MatrixXd direction;
  Eigen::VectorXd gain;
  Eigen::VectorXd bias;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  double loss = 0.0;  // mean clamped L1 over the batch (training-mode forward)

  static Gradients zeros_like(const SdfModel& model);
};

/// Batched forward pass (columns are samples). In training mode dropout masks are
/// drawn from `dropout_seed`; masks depend only on (seed, column position).
Eigen::VectorXd forward_batch(const SdfModel& model, const Eigen::MatrixXd& encoded, std::uint64_t dropout_seed = 0);

/// Single-sample forward. `rng_seed` is required in training mode.
double forward(const SdfModel& model, const Eigen::VectorXd& encoded, const std::uint64_t* rng_seed = nullptr);

/// |clamp(pred, -d_max, d_max) - target|
double clamped_l1_loss(double pred, double target, double d_max);

/// Exact reverse-mode gradients of the mean clamped L1 loss over the batch columns.
Gradients gradients(const SdfModel& model, const Eigen::MatrixXd& encoded, std::span<const double> targets,
                    double d_max, std::uint64_t dropout_seed = 0);

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 2000;
  std::size_t batch_size = 4096;
  double d_max = 0.1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool clamp_target = false;

  void validate() const;
};

struct TrainResult {
  SdfModel model;
  std::vector<double> loss_history;  // per-epoch mean training loss
};

TrainResult train(std::span<const QuerySample> samples, const TrainConfig& cfg, const EncodingConfig& enc,
                  const Architecture& arch);

/// Eval-mode SDF values at raw positions.
std::vector<double> evaluate_sdf(const SdfModel& model, const EncodingConfig& enc, std::span<const Vec3> positions);

/// Binary checkpoint: "PASDF001", u32 num_layers, u32 input_dim, u32 hidden_width, u32 skip_layer,
/// f32 dropout, then per layer u32 rows, u32 cols, f32 direction (row-major), f32 gain, f32 bias.
void save_checkpoint(const std::filesystem::path& path, const SdfModel& model);
SdfModel load_checkpoint(const std::filesystem::path& path);

}  // namespace pasdf
