#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace virel {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const ParamSlice&) const = default;
};

/// Names contiguous slices of a flat parameter vector. Slices are appended
/// back to back, so the layout always covers [0, size()) without overlap.
class ParamLayout {
 public:
  std::size_t add(std::string name, std::size_t size);
  std::size_t size() const noexcept { return total_; }
  const std::vector<ParamSlice>& slices() const noexcept { return slices_; }
  const ParamSlice& find(const std::string& name) const;

  bool operator==(const ParamLayout&) const = default;

 private:
  std::vector<ParamSlice> slices_;
  std::size_t total_ = 0;
};

/// Parameters (omega, theta, phi, ...) of one approximator.
struct ParamVector {
  Eigen::VectorXd values;
  ParamLayout layout;

  ParamVector() = default;
  explicit ParamVector(ParamLayout lay)
      : values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lay.size()))),
        layout(std::move(lay)) {}
  ParamVector(ParamLayout lay, Eigen::VectorXd vals);

  std::size_t size() const noexcept { return layout.size(); }
  ParamVector zeros_like() const { return ParamVector(layout); }
  Eigen::VectorXd::SegmentReturnType segment(const std::string& name);
  Eigen::VectorXd::ConstSegmentReturnType segment(const std::string& name) const;
};

void require_same_layout(const ParamVector& a, const ParamVector& b);

/// Plain gradient descent: params - lr * grad.
ParamVector apply_grad(const ParamVector& params, const ParamVector& grad, double lr);

/// Adam with the usual bias-corrected moment recursion.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParamVector& params, const ParamVector& grad);
  std::size_t steps() const noexcept { return t_; }
  double lr() const noexcept { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

// Checkpoint format: one line of JSON describing the layout, then the raw
// little-endian float64 block.
void write_checkpoint(std::ostream& out, const ParamVector& params);
ParamVector read_checkpoint(std::istream& in);

}  // namespace virel
