#include "virel/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace virel {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::size_t ParamLayout::add(std::string name, std::size_t size) {
  for (const auto& s : slices_) {
    if (s.name == name) throw std::invalid_argument("duplicate parameter slice '" + name + "'");
  }
  const std::size_t offset = total_;
  slices_.push_back({std::move(name), offset, size});
  total_ += size;
  return offset;
}

const ParamSlice& ParamLayout::find(const std::string& name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no parameter slice named '" + name + "'");
}

ParamVector::ParamVector(ParamLayout lay, Eigen::VectorXd vals)
    : values(std::move(vals)), layout(std::move(lay)) {
  if (static_cast<std::size_t>(values.size()) != layout.size()) {
    throw std::invalid_argument("parameter values do not match the layout size");
  }
}

Eigen::VectorXd::SegmentReturnType ParamVector::segment(const std::string& name) {
  const auto& s = layout.find(name);
  return values.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
}

Eigen::VectorXd::ConstSegmentReturnType ParamVector::segment(const std::string& name) const {
  const auto& s = layout.find(name);
  return values.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
}

void require_same_layout(const ParamVector& a, const ParamVector& b) {
  if (!(a.layout == b.layout) || a.values.size() != b.values.size()) {
    throw std::invalid_argument("parameter layout mismatch");
  }
}

ParamVector apply_grad(const ParamVector& params, const ParamVector& grad, double lr) {
  require_same_layout(params, grad);
  return ParamVector(params.layout, params.values - lr * grad.values);
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
}

void AdamOptimizer::step(ParamVector& params, const ParamVector& grad) {
  require_same_layout(params, grad);
  if (m_.size() == 0) {
    m_ = Eigen::VectorXd::Zero(params.values.size());
    v_ = Eigen::VectorXd::Zero(params.values.size());
  } else if (m_.size() != params.values.size()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad.values;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.values.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.values.array() -=
      lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void write_checkpoint(std::ostream& out, const ParamVector& params) {
  nlohmann::json header;
  header["format"] = "virel-params";
  header["dtype"] = "float64-le";
  header["count"] = params.size();
  auto slices = nlohmann::json::array();
  for (const auto& s : params.layout.slices()) {
    slices.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  }
  header["layout"] = std::move(slices);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

ParamVector read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint header missing");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "virel-params" || header.value("dtype", "") != "float64-le") {
    throw std::runtime_error("unrecognised checkpoint header");
  }
  ParamLayout layout;
  for (const auto& s : header.at("layout")) {
    const auto offset = layout.add(s.at("name").get<std::string>(), s.at("size").get<std::size_t>());
    if (offset != s.at("offset").get<std::size_t>()) {
      throw std::runtime_error("checkpoint layout is not contiguous");
    }
  }
  if (layout.size() != header.at("count").get<std::size_t>()) {
    throw std::runtime_error("checkpoint count does not match layout");
  }
  ParamVector params(layout);
  in.read(reinterpret_cast<char*>(params.values.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != params.size() * sizeof(double)) {
    throw std::runtime_error("checkpoint data block truncated");
  }
  return params;
}

}  // namespace virel
