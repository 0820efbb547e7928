#include <gtest/gtest.h>

#include "cavit/errors.hpp"
#include "cavit/ops.hpp"

using cavit::Tape;
using cavit::Tensor;

TEST(Tape, ChainRuleThroughSharedInput) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {1.5, -2.0}), true);
  auto y = cavit::sum_all(cavit::mul(x, x));  // sum x^2
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 3.0);
  EXPECT_DOUBLE_EQ(tape.grad(x)[1], -4.0);
}

TEST(Tape, BackwardRunsOnce) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(2.0), true);
  auto y = cavit::scale(x, 3.0);
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), cavit::StateError);
  tape.reset_grads();
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 3.0);
}

TEST(Tape, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}), true);
  EXPECT_THROW(tape.backward(cavit::scale(x, 1.0)), cavit::ContractError);
}

TEST(Tape, GradBeforeBackwardIsAStateError) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}), true);
  EXPECT_THROW(tape.grad(x), cavit::StateError);
}

TEST(Tape, NoRecordingAfterBackward) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(1.0), true);
  auto y = cavit::scale(x, 2.0);
  tape.backward(y);
  EXPECT_THROW(cavit::scale(x, 2.0), cavit::StateError);
}

TEST(Tape, UnreachableLeafGetsZeroGradient) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(1.0), true);
  auto unused = tape.leaf(Tensor<double>({3}, {1, 2, 3}), true);
  tape.backward(cavit::scale(x, 2.0));
  EXPECT_EQ(tape.grad(unused), Tensor<double>::zeros({3}));
}

TEST(Tape, ConstantsRecordNoRule) {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>::scalar(1.0));
  auto b = cavit::scale(a, 2.0);
  EXPECT_FALSE(tape.requires_grad(b.id()));
  EXPECT_FALSE(static_cast<bool>(tape.node(b.id()).rule));
}

TEST(FlopCounter, CountsTwiceTheMacsAndNests) {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({2, 3}));
  auto b = tape.leaf(Tensor<double>({3, 4}));
  cavit::FlopCounter outer;
  cavit::matmul(a, b);
  {
    cavit::FlopCounter inner;
    cavit::matmul(a, b);
    EXPECT_EQ(inner.matmul_flops(), 2u * 2 * 3 * 4);
  }
  EXPECT_EQ(outer.matmul_flops(), 2u * 2 * 3 * 4);
}

TEST(Tape, ValueReferencesSurviveGrowth) {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({3}, {1, 2, 3}));
  const auto& ref = a.value();
  for (int i = 0; i < 5000; ++i) tape.leaf(Tensor<double>({3}));
  EXPECT_EQ(ref.vec(), (std::vector<double>{1, 2, 3}));
}
