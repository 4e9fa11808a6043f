#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pasdf/sdf_model.hpp"

namespace pasdf::test {

/// Eval-mode forward written with plain loops, independent of the library's Eigen path.
inline double naive_forward(const SdfModel& m, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const Layer& layer = m.layers[l];
    std::vector<double> in = h;
    if (l > 0 && l + 1 == m.arch.skip_layer) in.insert(in.end(), x.begin(), x.end());
    const auto rows = static_cast<std::size_t>(layer.direction.rows());
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double norm_sq = 0.0, dot = 0.0;
      for (std::size_t c = 0; c < in.size(); ++c) {
        const double v = layer.direction(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        norm_sq += v * v;
        dot += v * in[c];
      }
      out[r] = layer.gain(static_cast<Eigen::Index>(r)) * dot / std::sqrt(norm_sq) + layer.bias(static_cast<Eigen::Index>(r));
      if (l + 1 < m.layers.size()) out[r] = std::max(out[r], 0.0);
    }
    h = std::move(out);
  }
  return h[0];
}

inline double naive_loss(const SdfModel& m, const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
                         double d_max) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s += std::abs(std::clamp(naive_forward(m, xs[i]), -d_max, d_max) - ys[i]);
  }
  return s / static_cast<double>(xs.size());
}

struct FdReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t negative_preactivations = 0;
};

/// Central differences (step h) over every parameter against `gradients`, eval mode.
inline FdReport finite_difference_check(const SdfModel& model, const Eigen::MatrixXd& encoded,
                                        const std::vector<double>& targets, double d_max, double h = 1e-5,
                                        double rel = 1e-4, double abs_tol = 1e-7) {
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(encoded.cols()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto c = encoded.col(static_cast<Eigen::Index>(i));
    xs[i].assign(c.data(), c.data() + c.size());
  }
  const Gradients g = gradients(model, encoded, targets, d_max);
  FdReport report;
  SdfModel probe = model;
  const auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = naive_loss(probe, xs, targets, d_max);
    param = keep - h;
    const double down = naive_loss(probe, xs, targets, d_max);
    param = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(numeric - analytic);
    ++report.checked;
    if (err > abs_tol && err > rel * std::max(std::abs(numeric), std::abs(analytic))) ++report.failures;
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    Layer& layer = probe.layers[l];
    for (Eigen::Index r = 0; r < layer.direction.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.direction.cols(); ++c) check(layer.direction(r, c), g.layers[l].direction(r, c));
      check(layer.gain(r), g.layers[l].gain(r));
      check(layer.bias(r), g.layers[l].bias(r));
    }
  }
  // Count dead units on the first hidden layer so callers can confirm the ReLU kink is exercised.
  const Eigen::MatrixXd z = (model.layers[0].effective_weight() * encoded).colwise() + model.layers[0].bias;
  report.negative_preactivations = static_cast<std::size_t>((z.array() < 0.0).count());
  return report;
}

/// Same check as finite_difference_check, but each probe re-evaluates only the perturbed row and
/// the layers after it, starting from cached activations. Intended for wide models.
class CachedFiniteDifference {
 public:
  CachedFiniteDifference(const SdfModel& model, const Eigen::MatrixXd& encoded, std::vector<double> targets,
                         double d_max)
      : model_(model), x_(encoded), targets_(std::move(targets)), d_max_(d_max) {
    const std::size_t n = model.layers.size();
    weights_.resize(n);
    inputs_.resize(n);
    pre_.resize(n);
    Eigen::MatrixXd h = encoded;
    for (std::size_t l = 0; l < n; ++l) {
      const Layer& layer = model.layers[l];
      weights_[l].resize(layer.direction.rows(), layer.direction.cols());
      for (Eigen::Index r = 0; r < layer.direction.rows(); ++r) {
        weights_[l].row(r) = row_weight(layer.direction.row(r), layer.gain(r));
      }
      inputs_[l] = with_skip(l, h);
      pre_[l] = (weights_[l] * inputs_[l]).colwise() + layer.bias;
      h = pre_[l].cwiseMax(0.0);
    }
  }

  double loss() const { return loss_with_row(0, 0, pre_[0].row(0)); }

  FdReport run(double h = 1e-5, double rel = 1e-4, double abs_tol = 1e-7) const {
    return run(gradients(model_, x_, targets_, d_max_), h, rel, abs_tol);
  }

  /// Compares the probes against caller-supplied gradients.
  FdReport run(const Gradients& g, double h = 1e-5, double rel = 1e-4, double abs_tol = 1e-7) const {
    FdReport report;
    for (std::size_t l = 0; l < model_.layers.size(); ++l) {
      const Layer& layer = model_.layers[l];
      for (Eigen::Index r = 0; r < layer.direction.rows(); ++r) {
        const Eigen::RowVectorXd v = layer.direction.row(r);
        const auto probe = [&](const Eigen::RowVectorXd& dir, double gain, double bias) {
          const Eigen::RowVectorXd z = row_weight(dir, gain) * inputs_[l] + Eigen::RowVectorXd::Constant(x_.cols(), bias);
          return loss_with_row(l, r, z);
        };
        const auto compare = [&](double up, double down, double analytic) {
          const double numeric = (up - down) / (2.0 * h);
          const double err = std::abs(numeric - analytic);
          ++report.checked;
          if (err > abs_tol && err > rel * std::max(std::abs(numeric), std::abs(analytic))) ++report.failures;
        };
        for (Eigen::Index c = 0; c < v.size(); ++c) {
          Eigen::RowVectorXd up = v, down = v;
          up(c) += h;
          down(c) -= h;
          compare(probe(up, layer.gain(r), layer.bias(r)), probe(down, layer.gain(r), layer.bias(r)), g.layers[l].direction(r, c));
        }
        compare(probe(v, layer.gain(r) + h, layer.bias(r)), probe(v, layer.gain(r) - h, layer.bias(r)), g.layers[l].gain(r));
        compare(probe(v, layer.gain(r), layer.bias(r) + h), probe(v, layer.gain(r), layer.bias(r) - h), g.layers[l].bias(r));
      }
    }
    for (std::size_t l = 0; l + 1 < pre_.size(); ++l) report.negative_preactivations += static_cast<std::size_t>((pre_[l].array() < 0.0).count());
    return report;
  }

 private:
  static Eigen::RowVectorXd row_weight(const Eigen::RowVectorXd& dir, double gain) {
    return gain * dir / std::sqrt(dir.squaredNorm());
  }

  Eigen::MatrixXd with_skip(std::size_t l, const Eigen::MatrixXd& h) const {
    if (!(l > 0 && l + 1 == model_.arch.skip_layer)) return h;
    Eigen::MatrixXd in(h.rows() + x_.rows(), h.cols());
    in << h, x_;
    return in;
  }

  double loss_with_row(std::size_t l, Eigen::Index r, const Eigen::RowVectorXd& z) const {
    Eigen::MatrixXd cur = pre_[l];
    cur.row(r) = z;
    for (std::size_t m = l + 1; m < model_.layers.size(); ++m) {
      cur = ((weights_[m] * with_skip(m, cur.cwiseMax(0.0))).colwise() + model_.layers[m].bias).eval();
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i < cur.cols(); ++i) {
      s += std::abs(std::clamp(cur(0, i), -d_max_, d_max_) - targets_[static_cast<std::size_t>(i)]);
    }
    return s / static_cast<double>(cur.cols());
  }

  const SdfModel& model_;
  Eigen::MatrixXd x_;
  std::vector<double> targets_;
  double d_max_;
  std::vector<Eigen::MatrixXd> weights_, inputs_, pre_;
};

/// Random model with biases spread so some hidden units start dead.
inline SdfModel random_model(const Architecture& arch, std::uint64_t seed, double bias_spread = 0.3) {
  SdfModel m = SdfModel::initialize(arch, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(-bias_spread, bias_spread), gain(0.5, 1.5);
  for (auto& layer : m.layers) {
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = u(rng);
      layer.gain(r) *= gain(rng);
    }
  }
  return m;
}

}  // namespace pasdf::test
