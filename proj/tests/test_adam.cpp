#include <gtest/gtest.h>

#include "mfg/nn/adam.hpp"

using namespace mfg::nn;

TEST(LinearDecay, MidpointAndClamp) {
  LinearDecay s{1e-2, 1e-5, 300000};
  EXPECT_DOUBLE_EQ(s.rate(0), 1e-2);
  EXPECT_NEAR(s.rate(150000), (1e-2 + 1e-5) / 2, 1e-17);
  EXPECT_DOUBLE_EQ(s.rate(300000), 1e-5);
  EXPECT_DOUBLE_EQ(s.rate(900000), 1e-5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState st(1, {1e-2, 1e-5, 1000});
  Eigen::VectorXd p(1), g(1);
  p << 1.0;
  g << 3.7;
  adam_step(st, p, g);
  // |dtheta| = lr |g| / (|g| + eps)
  EXPECT_NEAR(1.0 - p(0), 1e-2 * 3.7 / (3.7 + 1e-7), 1e-15);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  AdamState st(3, {1e-2, 1e-5, 1000});
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  const Eigen::VectorXd p0 = p;
  for (int i = 0; i < 50; ++i) adam_step(st, p, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(p, p0);
}

TEST(Adam, ShapeMismatchThrows) {
  AdamState st(3, {});
  Eigen::VectorXd p(2), g(2);
  EXPECT_THROW(adam_step(st, p, g), std::invalid_argument);
}

TEST(Adam, MinimizesQuadratic) {
  AdamState st(2, {5e-2, 1e-4, 2000});
  Eigen::VectorXd p(2);
  p << 3.0, -2.0;
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd g = 2.0 * (p - Eigen::Vector2d(0.5, 1.5));
    adam_step(st, p, g);
  }
  EXPECT_NEAR(p(0), 0.5, 1e-3);
  EXPECT_NEAR(p(1), 1.5, 1e-3);
}
