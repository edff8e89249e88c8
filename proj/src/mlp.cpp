#include "virel/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace virel {

namespace {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

Mlp::Mlp(std::size_t in_dim, std::size_t width, std::size_t out_dim, std::size_t hidden_layers) {
  if (in_dim == 0 || width == 0 || out_dim == 0) {
    throw std::invalid_argument("MLP dimensions must be positive");
  }
  sizes_.push_back(in_dim);
  for (std::size_t i = 0; i < hidden_layers; ++i) sizes_.push_back(width);
  sizes_.push_back(out_dim);
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += sizes_[l + 1] * (sizes_[l] + 1);
  return n;
}

void Mlp::append_layout(ParamLayout& layout, const std::string& prefix) {
  offset_ = layout.size();
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layout.add(prefix + ".W" + std::to_string(l), sizes_[l + 1] * sizes_[l]);
    layout.add(prefix + ".b" + std::to_string(l), sizes_[l + 1]);
  }
}

void Mlp::init(Eigen::VectorXd& params, Rng& rng) const {
  std::size_t off = offset_;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t count = sizes_[l + 1] * (sizes_[l] + 1);
    for (std::size_t i = 0; i < count; ++i) params(static_cast<Eigen::Index>(off + i)) = dist(rng);
    off += count;
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                             Tape* tape) const {
  if (static_cast<std::size_t>(x.rows()) != in_dim()) {
    throw std::invalid_argument("MLP input dimension mismatch");
  }
  if (tape) {
    tape->outputs.clear();
    tape->outputs.push_back(x);
  }
  Eigen::MatrixXd h = x;
  std::size_t off = offset_;
  const std::size_t n_layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    ConstMatMap w(params.data() + off, rows, cols);
    off += sizes_[l + 1] * sizes_[l];
    ConstVecMap b(params.data() + off, rows);
    off += sizes_[l + 1];
    Eigen::MatrixXd z = w * h;
    z.colwise() += b;
    if (l + 1 < n_layers) z = z.array().tanh();
    h = std::move(z);
    if (tape) tape->outputs.push_back(h);
  }
  return h;
}

void Mlp::backward(const Eigen::VectorXd& params, const Tape& tape, const Eigen::MatrixXd& d_out,
                   Eigen::VectorXd& grad, Eigen::MatrixXd* d_input) const {
  const std::size_t n_layers = sizes_.size() - 1;
  if (tape.outputs.size() != n_layers + 1) throw std::invalid_argument("MLP tape is incomplete");

  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = offset_;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += sizes_[l + 1] * (sizes_[l] + 1);
  }

  Eigen::MatrixXd delta = d_out;
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(sizes_[li + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[li]);
    if (li + 1 < n_layers) {
      // tanh'(z) = 1 - tanh(z)^2
      delta.array() *= 1.0 - tape.outputs[li + 1].array().square();
    }
    MatMap gw(grad.data() + offsets[li], rows, cols);
    VecMap gb(grad.data() + offsets[li] + sizes_[li + 1] * sizes_[li], rows);
    gw.noalias() += delta * tape.outputs[li].transpose();
    gb += delta.rowwise().sum();
    if (li > 0 || d_input) {
      ConstMatMap w(params.data() + offsets[li], rows, cols);
      Eigen::MatrixXd prev = w.transpose() * delta;
      if (li == 0) {
        *d_input = std::move(prev);
      } else {
        delta = std::move(prev);
      }
    }
  }
}

}  // namespace virel
