#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "virel/mlp.hpp"
#include "virel/params.hpp"

using namespace virel;

TEST(ParamLayout, SlicesAreContiguous) {
  ParamLayout lay;
  EXPECT_EQ(lay.add("w", 6), 0u);
  EXPECT_EQ(lay.add("b", 2), 6u);
  EXPECT_EQ(lay.size(), 8u);
  EXPECT_EQ(lay.find("b").offset, 6u);
  EXPECT_ANY_THROW(lay.find("missing"));
  EXPECT_ANY_THROW(lay.add("w", 1));
}

TEST(ParamVector, NamedSegmentsAlias) {
  ParamLayout lay;
  lay.add("a", 2);
  lay.add("b", 3);
  ParamVector p(lay);
  p.segment("b").setConstant(4.0);
  EXPECT_DOUBLE_EQ(p.values.sum(), 12.0);
}

TEST(ParamVector, LayoutMismatchThrows) {
  ParamLayout a, b;
  a.add("x", 2);
  b.add("y", 2);
  EXPECT_ANY_THROW(require_same_layout(ParamVector(a), ParamVector(b)));
}

TEST(Adam, MinimisesQuadratic) {
  ParamLayout lay;
  lay.add("x", 3);
  ParamVector p(lay, Eigen::Vector3d(3.0, -2.0, 1.0));
  AdamOptimizer opt(0.05);
  for (int i = 0; i < 2000; ++i) {
    ParamVector g = p;  // d/dx 1/2 |x|^2
    opt.step(p, g);
  }
  EXPECT_LT(p.values.norm(), 1e-3);
  EXPECT_EQ(opt.steps(), 2000u);
}

TEST(Checkpoint, RoundTripIsExact) {
  ParamLayout lay;
  lay.add("w", 4);
  lay.add("b", 1);
  ParamVector p(lay, (Eigen::VectorXd(5) << 0.1, -1.0 / 3.0, 1e-300, 7.0, -0.0).finished());
  std::stringstream ss;
  write_checkpoint(ss, p);
  const ParamVector q = read_checkpoint(ss);
  EXPECT_EQ(q.layout, p.layout);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_EQ(q.values(i), p.values(i));
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("not a checkpoint");
  EXPECT_ANY_THROW(read_checkpoint(ss));
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Mlp net(3, 5, 2);
  ParamLayout lay;
  net.append_layout(lay, "net");
  Eigen::VectorXd params(static_cast<Eigen::Index>(lay.size()));
  Rng rng(1);
  net.init(params, rng);
  std::mt19937_64 g(2);
  const Eigen::MatrixXd x = oracle::gaussian(3, 4, g);
  const Eigen::MatrixXd up = oracle::gaussian(2, 4, g);
  Mlp::Tape tape;
  net.forward(params, x, &tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  Eigen::MatrixXd d_in;
  net.backward(params, tape, up, grad, &d_in);
  const Eigen::VectorXd fd = oracle::central_difference(
      [&](const Eigen::VectorXd& w) { return (net.forward(w, x).array() * up.array()).sum(); }, params);
  EXPECT_LT(oracle::rel_err(grad, fd), 1e-6);
  const Eigen::VectorXd fd_x = oracle::central_difference(
      [&](const Eigen::VectorXd& xv) {
        return (net.forward(params, Eigen::Map<const Eigen::MatrixXd>(xv.data(), 3, 4)).array() * up.array()).sum();
      },
      Eigen::Map<const Eigen::VectorXd>(x.data(), 12));
  EXPECT_LT(oracle::rel_err(Eigen::Map<const Eigen::VectorXd>(d_in.data(), 12), fd_x), 1e-6);
}
