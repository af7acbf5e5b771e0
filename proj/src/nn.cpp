#include "pauseflow/nn.hpp"

#include <cmath>

#include "pauseflow/rng.hpp"

namespace pauseflow::nn {

Mlp Mlp::glorot(const std::vector<int>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw UsageError("network needs at least input and output sizes");
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i], out = sizes[i + 1];
    if (in < 1 || out < 1) throw UsageError("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    Layer l{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index c = 0; c < l.w.cols(); ++c)
      for (Eigen::Index r = 0; r < l.w.rows(); ++r) l.w(r, c) = rng.uniform(-limit, limit);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].w * h;
    z.colwise() += layers_[i].b;
    h = (i + 1 < layers_.size()) ? Matrix(z.array().tanh()) : std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  tape.activations.clear();
  tape.activations.push_back(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].w * tape.activations.back();
    z.colwise() += layers_[i].b;
    if (i + 1 < layers_.size()) z = z.array().tanh();
    tape.activations.push_back(std::move(z));
  }
  return tape.activations.back();
}

Matrix Mlp::backward(const Tape& tape, const Matrix& d_out, Vector& grad) const {
  if (grad.size() != static_cast<Eigen::Index>(num_params())) grad = Vector::Zero(num_params());
  // Offsets of each layer in the flattened layout.
  std::vector<Eigen::Index> offset(layers_.size());
  Eigen::Index o = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offset[i] = o;
    o += layers_[i].w.size() + layers_[i].b.size();
  }
  Matrix delta = d_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    if (k + 1 < layers_.size()) {
      // tanh'(z) = 1 - h^2 with h the stored activation
      delta.array() *= 1.0 - tape.activations[k + 1].array().square();
    }
    const Matrix& in = tape.activations[k];
    Eigen::Map<Matrix> gw(grad.data() + offset[k], l.w.rows(), l.w.cols());
    gw.noalias() += delta * in.transpose();
    Eigen::Map<Vector> gb(grad.data() + offset[k] + l.w.size(), l.b.size());
    gb += delta.rowwise().sum();
    delta = l.w.transpose() * delta;
  }
  return delta;
}

Vector Mlp::flatten() const {
  Vector flat(num_params());
  Eigen::Index o = 0;
  for (const auto& l : layers_) {
    flat.segment(o, l.w.size()) = Eigen::Map<const Vector>(l.w.data(), l.w.size());
    o += l.w.size();
    flat.segment(o, l.b.size()) = l.b;
    o += l.b.size();
  }
  return flat;
}

void Mlp::assign(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(num_params()))
    throw UsageError("parameter vector size mismatch");
  Eigen::Index o = 0;
  for (auto& l : layers_) {
    Eigen::Map<Vector>(l.w.data(), l.w.size()) = flat.segment(o, l.w.size());
    o += l.w.size();
    l.b = flat.segment(o, l.b.size());
    o += l.b.size();
  }
}

json layers_to_json(const std::vector<Layer>& layers) {
  json out = json::array();
  for (const auto& l : layers) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) row.push_back(l.w(r, c));
      w.push_back(std::move(row));
    }
    out.push_back({{"w", std::move(w)}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  return out;
}

std::vector<Layer> layers_from_json(const json& j) {
  std::vector<Layer> layers;
  for (const auto& jl : j) {
    const auto& w = jl.at("w");
    const auto b = jl.at("b").get<std::vector<double>>();
    const Eigen::Index rows = static_cast<Eigen::Index>(w.size());
    if (rows == 0 || rows != static_cast<Eigen::Index>(b.size()))
      throw Error("layer weight rows do not match bias length");
    const Eigen::Index cols = static_cast<Eigen::Index>(w.at(0).size());
    Layer l{Matrix(rows, cols), Vector(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& row = w.at(r);
      if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged weight matrix");
      for (Eigen::Index c = 0; c < cols; ++c) l.w(r, c) = row.at(c).get<double>();
      l.b(r) = b[r];
    }
    if (!layers.empty() && layers.back().w.rows() != cols)
      throw Error("layer shapes do not chain");
    layers.push_back(std::move(l));
  }
  if (layers.empty()) throw Error("network has no layers");
  return layers;
}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  params.array() -= config_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.eps);
}

}  // namespace pauseflow::nn
