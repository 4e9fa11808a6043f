#include "pasdf/sdf_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "pasdf/parallel.hpp"

namespace pasdf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --- positional encoding -------------------------------------------------------

VectorXd positional_encode(const Vec3& x, const EncodingConfig& cfg) {
  VectorXd out(cfg.dim());
  std::size_t k = 0;
  if (cfg.include_input) {
    for (int a = 0; a < 3; ++a) out[k++] = x[a];
  }
  double freq = std::numbers::pi;
  for (std::size_t l = 0; l < cfg.num_frequencies; ++l, freq *= 2.0) {
    for (int a = 0; a < 3; ++a) out[k++] = std::sin(freq * x[a]);
    for (int a = 0; a < 3; ++a) out[k++] = std::cos(freq * x[a]);
  }
  return out;
}

MatrixXd positional_encode(std::span<const Vec3> xs, const EncodingConfig& cfg) {
  MatrixXd out(cfg.dim(), xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out.col(i) = positional_encode(xs[i], cfg); }, 1024);
  return out;
}

// --- architecture / parameters ------------------------------------------------------

void Architecture::validate() const {
  if (input_dim < 1) throw InvalidParameter("architecture: input_dim must be >= 1");
  if (hidden_width < 1) throw InvalidParameter("architecture: hidden_width must be >= 1");
  if (num_layers < 1) throw InvalidParameter("architecture: num_layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidParameter("architecture: dropout must be in [0,1)");
}

bool Architecture::has_skip_at(std::size_t layer) const {
  return skip_layer >= 2 && layer > 0 && layer + 1 == skip_layer && layer < num_layers;
}

std::size_t Architecture::layer_in(std::size_t layer) const {
  const std::size_t base = layer == 0 ? input_dim : hidden_width;
  return base + (has_skip_at(layer) ? input_dim : 0);
}

std::size_t Architecture::layer_out(std::size_t layer) const { return layer + 1 == num_layers ? 1 : hidden_width; }

MatrixXd Layer::effective_weight() const {
  const VectorXd norms = direction.rowwise().norm();
  return (gain.cwiseQuotient(norms)).asDiagonal() * direction;
}

SdfModel SdfModel::initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  SdfModel m;
  m.arch = arch;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    const auto in = static_cast<Eigen::Index>(arch.layer_in(l));
    const auto out = static_cast<Eigen::Index>(arch.layer_out(l));
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    Layer layer;
    layer.direction.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.direction(r, c) = gauss(rng);
    }
    layer.gain = layer.direction.rowwise().norm();
    layer.bias = VectorXd::Zero(out);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

SdfModel SdfModel::zeros(const Architecture& arch) {
  arch.validate();
  SdfModel m;
  m.arch = arch;
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    const auto in = static_cast<Eigen::Index>(arch.layer_in(l));
    const auto out = static_cast<Eigen::Index>(arch.layer_out(l));
    Layer layer;
    layer.direction = MatrixXd::Constant(out, in, 1.0 / std::sqrt(static_cast<double>(in)));
    layer.gain = VectorXd::Zero(out);
    layer.bias = VectorXd::Zero(out);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

std::size_t SdfModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.direction.size() + l.gain.size() + l.bias.size());
  return n;
}

void SdfModel::validate() const {
  arch.validate();
  if (layers.size() != arch.num_layers) throw InvalidInput("model: layer count does not match architecture");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const auto in = static_cast<Eigen::Index>(arch.layer_in(l));
    const auto out = static_cast<Eigen::Index>(arch.layer_out(l));
    if (L.direction.rows() != out || L.direction.cols() != in || L.gain.size() != out || L.bias.size() != out) {
      throw InvalidInput("model: layer " + std::to_string(l) + " has the wrong shape");
    }
    if ((L.direction.rowwise().norm().array() <= 1e-12).any()) {
      throw InvalidInput("model: layer " + std::to_string(l) + " has a vanishing direction row");
    }
  }
}

Gradients Gradients::zeros_like(const SdfModel& model) {
  Gradients g;
  for (const auto& l : model.layers) {
    g.layers.push_back({MatrixXd::Zero(l.direction.rows(), l.direction.cols()), VectorXd::Zero(l.gain.size()),
                        VectorXd::Zero(l.bias.size())});
  }
  return g;
}

// --- forward / backward ----------------------------------------------------------

namespace {

constexpr Eigen::Index kChunk = 256;

struct Cache {
  std::vector<MatrixXd> inputs;  // input to each layer
  std::vector<MatrixXd> pre;     // pre-activation of each hidden layer
  std::vector<MatrixXd> masks;   // scaled dropout masks (training only)
};

// Inverted-dropout mask for one column of one layer. Counter-based: each 64-bit hash of
// (column key, layer, unit group) yields four 16-bit uniforms, so the keep probability is
// quantized to 1/65536 and the survivors are rescaled by the quantized rate.
void fill_dropout_column(double* out, Eigen::Index rows, std::uint64_t col_key, std::size_t layer, double p) {
  const auto drop_below = static_cast<std::uint32_t>(std::lround(p * 65536.0));
  const double keep = 1.0 - static_cast<double>(drop_below) / 65536.0;
  const double scale = keep > 0.0 ? 1.0 / keep : 0.0;
  const std::uint64_t base = col_key + (static_cast<std::uint64_t>(layer) << 40);
  for (Eigen::Index r = 0; r < rows; r += 4) {
    std::uint64_t bits = mix64(base + static_cast<std::uint64_t>(r / 4));
    for (Eigen::Index q = r; q < std::min(rows, r + 4); ++q, bits >>= 16) {
      out[q] = static_cast<std::uint32_t>(bits & 0xffff) < drop_below ? 0.0 : scale;
    }
  }
}

/// Forward over a column block whose first column has absolute index `col0`.
VectorXd run_forward(const SdfModel& model, const std::vector<MatrixXd>& weights, const MatrixXd& encoded,
                     std::uint64_t seed, Eigen::Index col0, Cache* cache) {
  const auto& arch = model.arch;
  const Eigen::Index n = encoded.cols();
  const bool dropout = model.training && arch.dropout > 0.0;
  std::vector<std::uint64_t> col_keys;
  if (dropout) {
    col_keys.resize(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < n; ++c) col_keys[c] = derive_seed(seed, static_cast<std::uint64_t>(col0 + c));
  }
  if (cache) {
    cache->inputs.assign(arch.num_layers, {});
    cache->pre.assign(arch.num_layers, {});
    cache->masks.assign(arch.num_layers, {});
  }
  MatrixXd h = encoded;
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    MatrixXd in;
    if (arch.has_skip_at(l)) {
      in.resize(h.rows() + encoded.rows(), n);
      in.topRows(h.rows()) = h;
      in.bottomRows(encoded.rows()) = encoded;
    } else {
      in = std::move(h);
    }
    MatrixXd z = weights[l] * in;
    z.colwise() += model.layers[l].bias;
    if (cache) cache->inputs[l] = std::move(in);
    if (l + 1 == arch.num_layers) return z.row(0).transpose();

    MatrixXd a = z.cwiseMax(0.0);
    if (dropout) {
      MatrixXd mask(a.rows(), n);
      for (Eigen::Index c = 0; c < n; ++c) fill_dropout_column(&mask(0, c), a.rows(), col_keys[c], l, arch.dropout);
      a.array() *= mask.array();
      if (cache) cache->masks[l] = std::move(mask);
    }
    if (cache) cache->pre[l] = std::move(z);
    h = std::move(a);
  }
  return {};
}

std::vector<MatrixXd> effective_weights(const SdfModel& model) {
  std::vector<MatrixXd> w;
  w.reserve(model.layers.size());
  for (const auto& l : model.layers) w.push_back(l.effective_weight());
  return w;
}

void check_input(const SdfModel& model, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != model.arch.input_dim) {
    throw InvalidInput("forward: encoded length " + std::to_string(rows) + " != model input dim " +
                       std::to_string(model.arch.input_dim));
  }
  if (model.layers.size() != model.arch.num_layers) throw InvalidInput("forward: model has no parameters");
}

/// Accumulates effective-weight gradients (dW, db) of one column block into `acc`.
double backward_block(const SdfModel& model, const std::vector<MatrixXd>& weights, const MatrixXd& encoded,
                      std::span<const double> targets, double d_max, double inv_n, std::uint64_t seed,
                      Eigen::Index col0, bool clamp_target, std::vector<MatrixXd>& dW, std::vector<VectorXd>& db) {
  Cache cache;
  const VectorXd pred = run_forward(model, weights, encoded, seed, col0, &cache);
  const Eigen::Index n = encoded.cols();
  MatrixXd delta(1, n);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double s = clamp_target ? std::clamp(targets[c], -d_max, d_max) : targets[c];
    const double clamped = std::clamp(pred[c], -d_max, d_max);
    const double r = clamped - s;
    loss += std::abs(r);
    const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    const double pass = std::abs(pred[c]) <= d_max ? 1.0 : 0.0;
    delta(0, c) = sign * pass * inv_n;
  }
  const auto& arch = model.arch;
  for (std::size_t l = arch.num_layers; l-- > 0;) {
    dW[l].noalias() += delta * cache.inputs[l].transpose();
    db[l] += delta.rowwise().sum().transpose();
    if (l == 0) break;
    MatrixXd d_in = weights[l].transpose() * delta;
    MatrixXd d_a = d_in.topRows(static_cast<Eigen::Index>(arch.hidden_width));
    if (model.training && arch.dropout > 0.0) d_a.array() *= cache.masks[l - 1].array();
    delta = (cache.pre[l - 1].array() > 0.0).select(d_a, 0.0);
  }
  return loss;
}

}  // namespace

VectorXd forward_batch(const SdfModel& model, const MatrixXd& encoded, std::uint64_t dropout_seed) {
  check_input(model, encoded.rows());
  const auto weights = effective_weights(model);
  const Eigen::Index n = encoded.cols();
  VectorXd out(n);
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index len = std::min(kChunk, n - begin);
    out.segment(begin, len) = run_forward(model, weights, encoded.middleCols(begin, len), dropout_seed, begin, nullptr);
  }, 1);
  return out;
}

double forward(const SdfModel& model, const VectorXd& encoded, const std::uint64_t* rng_seed) {
  if (model.training && model.arch.dropout > 0.0 && rng_seed == nullptr) {
    throw InvalidInput("forward: training-mode forward requires an rng seed");
  }
  check_input(model, encoded.size());
  const auto weights = effective_weights(model);
  const MatrixXd col = encoded;
  return run_forward(model, weights, col, rng_seed ? *rng_seed : 0, 0, nullptr)[0];
}

double clamped_l1_loss(double pred, double target, double d_max) {
  if (!(d_max > 0.0)) throw InvalidParameter("clamped_l1_loss: d_max must be positive");
  return std::abs(std::clamp(pred, -d_max, d_max) - target);
}

namespace {

Gradients gradients_impl(const SdfModel& model, const MatrixXd& encoded, std::span<const double> targets, double d_max,
                         std::uint64_t seed, bool clamp_target) {
  check_input(model, encoded.rows());
  if (encoded.cols() == 0) throw InvalidInput("gradients: empty batch");
  if (static_cast<std::size_t>(encoded.cols()) != targets.size()) throw InvalidInput("gradients: target count mismatch");
  if (!(d_max > 0.0)) throw InvalidParameter("gradients: d_max must be positive");

  const auto weights = effective_weights(model);
  const Eigen::Index n = encoded.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  const std::size_t L = model.layers.size();

  std::vector<std::vector<MatrixXd>> dW(chunks);
  std::vector<std::vector<VectorXd>> db(chunks);
  std::vector<double> losses(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    dW[c].resize(L);
    db[c].resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      dW[c][l] = MatrixXd::Zero(weights[l].rows(), weights[l].cols());
      db[c][l] = VectorXd::Zero(weights[l].rows());
    }
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index len = std::min(kChunk, n - begin);
    losses[c] = backward_block(model, weights, encoded.middleCols(begin, len), targets.subspan(begin, len), d_max, inv_n,
                               seed, begin, clamp_target, dW[c], db[c]);
  }, 1);

  // Fixed-order reduction over chunks.
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t l = 0; l < L; ++l) {
      dW[0][l] += dW[c][l];
      db[0][l] += db[c][l];
    }
    losses[0] += losses[c];
  }

  Gradients g;
  g.loss = losses[0] * inv_n;
  g.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    const VectorXd norms = layer.direction.rowwise().norm();
    const MatrixXd unit = norms.cwiseInverse().asDiagonal() * layer.direction;
    const VectorXd proj = (dW[0][l].cwiseProduct(unit)).rowwise().sum();  // dW_i . v_i/|v_i|
    g.layers[l].gain = proj;
    g.layers[l].direction =
        (layer.gain.cwiseQuotient(norms)).asDiagonal() * (dW[0][l] - proj.asDiagonal() * unit);
    g.layers[l].bias = db[0][l];
  }
  return g;
}

}  // namespace

Gradients gradients(const SdfModel& model, const MatrixXd& encoded, std::span<const double> targets, double d_max,
                    std::uint64_t dropout_seed) {
  return gradients_impl(model, encoded, targets, d_max, dropout_seed, false);
}

// --- training ----------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidParameter("train: learning_rate must be positive");
  if (!(d_max > 0.0)) throw InvalidParameter("train: d_max must be positive");
  if (batch_size < 1) throw InvalidParameter("train: batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidParameter("train: Adam decay rates must be in [0,1)");
  }
  if (!(epsilon > 0.0)) throw InvalidParameter("train: epsilon must be positive");
}

namespace {

double parameter_norm(const SdfModel& m) {
  double s = 0.0;
  for (const auto& l : m.layers) s += l.direction.squaredNorm() + l.gain.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(s);
}

bool all_finite(const Gradients& g) {
  if (!std::isfinite(g.loss)) return false;
  for (const auto& l : g.layers) {
    if (!l.direction.allFinite() || !l.gain.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

struct AdamState {
  Gradients m, v;
  std::size_t t = 0;
};

template <class Param, class Grad>
void adam_step(Param& p, const Grad& g, Param& m, Param& v, const TrainConfig& cfg, double c1, double c2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace

TrainResult train(std::span<const QuerySample> samples, const TrainConfig& cfg, const EncodingConfig& enc,
                  const Architecture& arch_in) {
  cfg.validate();
  if (samples.empty()) throw InvalidInput("train: no samples");
  Architecture arch = arch_in;
  arch.input_dim = enc.dim();
  arch.validate();

  std::vector<Vec3> positions(samples.size());
  std::vector<double> targets(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    positions[i] = samples[i].position;
    targets[i] = samples[i].sdf;
  }
  const MatrixXd encoded = positional_encode(positions, enc);

  TrainResult result;
  result.model = SdfModel::initialize(arch, derive_seed(cfg.seed, "init"));
  result.model.training = true;
  AdamState adam{Gradients::zeros_like(result.model), Gradients::zeros_like(result.model), 0};

  const std::size_t n = samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MatrixXd batch_x;
  std::vector<double> batch_y;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      batch_x.resize(encoded.rows(), static_cast<Eigen::Index>(len));
      batch_y.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        batch_x.col(static_cast<Eigen::Index>(j)) = encoded.col(static_cast<Eigen::Index>(order[start + j]));
        batch_y[j] = targets[order[start + j]];
      }
      const Gradients g = gradients_impl(result.model, batch_x, batch_y, cfg.d_max,
                                         derive_seed(cfg.seed, step++), cfg.clamp_target);
      if (!all_finite(g)) {
        std::ostringstream msg;
        msg << "train: non-finite loss/gradient at epoch " << epoch << ", batch " << batch
            << ", parameter norm " << parameter_norm(result.model);
        throw NumericFailure(msg.str());
      }
      epoch_loss += g.loss * static_cast<double>(len);

      ++adam.t;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
      for (std::size_t l = 0; l < result.model.layers.size(); ++l) {
        auto& P = result.model.layers[l];
        auto& M = adam.m.layers[l];
        auto& V = adam.v.layers[l];
        adam_step(P.direction, g.layers[l].direction, M.direction, V.direction, cfg, c1, c2);
        adam_step(P.gain, g.layers[l].gain, M.gain, V.gain, cfg, c1, c2);
        adam_step(P.bias, g.layers[l].bias, M.bias, V.bias, cfg, c1, c2);
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  result.model.training = false;
  return result;
}

std::vector<double> evaluate_sdf(const SdfModel& model, const EncodingConfig& enc, std::span<const Vec3> positions) {
  if (positions.empty()) return {};
  SdfModel eval = model;
  eval.training = false;
  const VectorXd out = forward_batch(eval, positional_encode(positions, enc));
  return {out.data(), out.data() + out.size()};
}

// --- checkpoints ----------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'A', 'S', 'D', 'F', '0', '0', '1'};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ArtifactMismatch("checkpoint " + path.string() + ": truncated");
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SdfModel& model) {
  model.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const auto& a = model.arch;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.num_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.skip_layer));
  put<float>(out, static_cast<float>(a.dropout));
  for (const auto& l : model.layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.direction.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.direction.cols()));
    for (Eigen::Index r = 0; r < l.direction.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.direction.cols(); ++c) put<float>(out, static_cast<float>(l.direction(r, c)));
    }
    for (Eigen::Index r = 0; r < l.gain.size(); ++r) put<float>(out, static_cast<float>(l.gain[r]));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put<float>(out, static_cast<float>(l.bias[r]));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SdfModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic)) {
    throw ArtifactMismatch("checkpoint " + path.string() + ": bad magic");
  }
  SdfModel m;
  m.arch.num_layers = get<std::uint32_t>(in, path);
  m.arch.input_dim = get<std::uint32_t>(in, path);
  m.arch.hidden_width = get<std::uint32_t>(in, path);
  m.arch.skip_layer = get<std::uint32_t>(in, path);
  m.arch.dropout = get<float>(in, path);
  try {
    m.arch.validate();
  } catch (const InvalidParameter& e) {
    throw ArtifactMismatch("checkpoint " + path.string() + ": " + e.what());
  }
  for (std::size_t l = 0; l < m.arch.num_layers; ++l) {
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    if (rows != m.arch.layer_out(l) || cols != m.arch.layer_in(l)) {
      throw ArtifactMismatch("checkpoint " + path.string() + ": layer " + std::to_string(l) + " shape mismatch");
    }
    Layer layer;
    layer.direction.resize(rows, cols);
    layer.gain.resize(rows);
    layer.bias.resize(rows);
    for (Eigen::Index r = 0; r < layer.direction.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.direction.cols(); ++c) layer.direction(r, c) = get<float>(in, path);
    }
    for (Eigen::Index r = 0; r < layer.gain.size(); ++r) layer.gain[r] = get<float>(in, path);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = get<float>(in, path);
    m.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ArtifactMismatch("checkpoint " + path.string() + ": trailing bytes");
  }
  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw ArtifactMismatch(std::string("checkpoint: ") + e.what());
  }
  return m;
}

}  // namespace pasdf
