#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "virel/mdp.hpp"
#include "virel/params.hpp"

namespace virel {

/// Fully connected network with tanh hidden layers and a linear output layer.
/// The network owns no weights: it reads them from a slice of a flat
/// parameter vector registered with append_layout().
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in_dim, std::size_t width, std::size_t out_dim, std::size_t hidden_layers = 2);

  std::size_t in_dim() const { return sizes_.front(); }
  std::size_t out_dim() const { return sizes_.back(); }
  std::size_t n_params() const;

  void append_layout(ParamLayout& layout, const std::string& prefix);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(Eigen::VectorXd& params, Rng& rng) const;

  /// Per-layer outputs kept for the backward pass. outputs[0] is the input.
  struct Tape {
    std::vector<Eigen::MatrixXd> outputs;
  };

  /// x holds one input per column. Returns out_dim x batch.
  Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x,
                          Tape* tape = nullptr) const;

  /// Reverse pass for upstream gradient d_out (out_dim x batch). Accumulates
  /// parameter gradients into grad (full-length vector) and, when requested,
  /// writes the gradient with respect to the input.
  void backward(const Eigen::VectorXd& params, const Tape& tape, const Eigen::MatrixXd& d_out,
                Eigen::VectorXd& grad, Eigen::MatrixXd* d_input = nullptr) const;

 private:
  std::vector<std::size_t> sizes_;
  std::size_t offset_ = 0;
};

}  // namespace virel
