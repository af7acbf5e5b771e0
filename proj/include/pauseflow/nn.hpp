#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pauseflow/core.hpp"

namespace pauseflow::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Layer {
  Matrix w;  // out x in
  Vector b;

  bool operator==(const Layer& o) const { return w == o.w && b == o.b; }
};

/// Fully connected network: tanh on hidden layers, identity on the output.
/// Inputs and outputs are column-major batches (features x batch).
class Mlp {
 public:
  Mlp() = default;

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(const std::vector<int>& sizes, std::uint64_t seed);

  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {}

  int input_dim() const { return static_cast<int>(layers_.front().w.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().w.rows()); }
  std::size_t num_params() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Matrix forward(const Matrix& x) const;

  /// Forward pass that keeps activations for backward().
  struct Tape {
    std::vector<Matrix> activations;  // input, hidden outputs..., final output
  };
  Matrix forward(const Matrix& x, Tape& tape) const;

  /// Accumulates dLoss/dparams (flattened layout) for output gradient `d_out`.
  /// Returns dLoss/dinput.
  Matrix backward(const Tape& tape, const Matrix& d_out, Vector& grad) const;

  /// Flattened parameters: per layer, w in column-major order then b.
  Vector flatten() const;
  void assign(const Vector& flat);

  bool operator==(const Mlp& o) const { return layers_ == o.layers_; }

 private:
  std::vector<Layer> layers_;
};

json layers_to_json(const std::vector<Layer>& layers);
std::vector<Layer> layers_from_json(const json& j);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig config)
      : config_(config), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  /// In-place descent step on `params`.
  void step(Vector& params, const Vector& grad);

 private:
  AdamConfig config_;
  Vector m_, v_;
  long t_ = 0;
};

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace pauseflow::nn
