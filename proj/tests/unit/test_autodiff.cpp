#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "yieldnet/autodiff.hpp"
#include "yieldnet/error.hpp"
#include "yieldnet/grad_check.hpp"
#include "yieldnet/ops.hpp"

using namespace yieldnet;
using namespace yieldnet::ad;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Zero-padded cross-correlation written directly from its definition.
std::vector<double> conv_oracle(const std::vector<double>& x, std::size_t c_in, std::size_t len,
                                const std::vector<double>& w, std::size_t c_out, std::size_t k,
                                const std::vector<double>& b) {
  const long pad = static_cast<long>((k - 1) / 2);
  std::vector<double> y(c_out * len, 0.0);
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t t = 0; t < len; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const long pos = static_cast<long>(t) + static_cast<long>(j) - pad;
          if (pos < 0 || pos >= static_cast<long>(len)) continue;
          acc += w[(o * c_in + c) * k + j] * x[c * len + static_cast<std::size_t>(pos)];
        }
      }
      y[o * len + t] = acc;
    }
  }
  return y;
}

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("conv1d: zero input and zero bias give zeros") {
  Tape tape;
  auto x = tape.input(Tensor({2, 5}));
  auto w = tape.input(testing::random_tensor({3, 2, 3}, 1));
  auto b = tape.input(Tensor({3}));
  auto y = conv1d(x, w, b);
  CHECK(y.shape() == Shape{3, 5});
  for (double v : y.value()) CHECK(v == 0.0);
}

TEST_CASE("conv1d: identity kernel and difference kernel") {
  Tape tape;
  auto x = tape.input(Tensor({1, 4}, {1, 2, 3, 4}));
  auto b = tape.input(Tensor({1}));
  auto ident = conv1d(x, tape.input(Tensor({1, 1, 3}, {0, 1, 0})), b);
  CHECK(to_vec(ident.value()) == std::vector<double>{1, 2, 3, 4});
  auto diff = conv1d(x, tape.input(Tensor({1, 1, 3}, {1, 0, -1})), b);
  CHECK(to_vec(diff.value()) == std::vector<double>{-2, -2, -2, 3});
}

TEST_CASE("conv1d matches the direct-summation oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t c_in = 3, c_out = 4, len = 11, k = seed % 2 == 0 ? 3 : 5;
    auto xt = testing::random_tensor({c_in, len}, 100 + seed);
    auto wt = testing::random_tensor({c_out, c_in, k}, 200 + seed);
    auto bt = testing::random_tensor({c_out}, 300 + seed);
    Tape tape;
    auto y = conv1d(tape.input(xt), tape.input(wt), tape.input(bt));
    auto expected = conv_oracle(to_vec(xt.values()), c_in, len, to_vec(wt.values()), c_out, k, to_vec(bt.values()));
    CHECK(testing::max_abs_diff(to_vec(y.value()), expected) < 1e-12);
  }
}

TEST_CASE("conv1d: batched input equals per-sample evaluation") {
  auto xt = testing::random_tensor({3, 2, 7}, 5);
  auto wt = testing::random_tensor({4, 2, 3}, 6);
  auto bt = testing::random_tensor({4}, 7);
  Tape tape;
  auto w = tape.input(wt);
  auto b = tape.input(bt);
  auto batched = to_vec(conv1d(tape.input(xt), w, b).value());
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> one(xt.values().begin() + s * 14, xt.values().begin() + (s + 1) * 14);
    auto single = to_vec(conv1d(tape.input(Tensor({2, 7}, one)), w, b).value());
    std::vector<double> slice(batched.begin() + s * 28, batched.begin() + (s + 1) * 28);
    CHECK(single == slice);
  }
}

TEST_CASE("conv1d rejects mismatched channels") {
  Tape tape;
  auto x = tape.input(Tensor({2, 4}));
  auto w = tape.input(Tensor({1, 3, 3}));
  auto b = tape.input(Tensor({1}));
  CHECK_THROWS_AS(conv1d(x, w, b), ContractViolation);
}

TEST_CASE("avgpool1d examples") {
  Tape tape;
  auto c = avgpool1d(tape.input(Tensor({1, 8}, std::vector<double>(8, 2.5))));
  CHECK(to_vec(c.value()) == std::vector<double>(4, 2.5));
  CHECK(to_vec(avgpool1d(tape.input(Tensor({1, 4}, {1, 2, 3, 4}))).value()) == std::vector<double>{1.5, 3.5});
  auto odd = avgpool1d(tape.input(Tensor({1, 5}, {1, 2, 3, 4, 9})));
  CHECK(odd.shape() == Shape{1, 2});
  CHECK(to_vec(odd.value()) == std::vector<double>{1.5, 3.5});
  CHECK_THROWS_AS(avgpool1d(tape.input(Tensor({1, 1}, {1}))), ContractViolation);
}

TEST_CASE("avgpool1d backward spreads half the gradient and skips the dropped element") {
  Tape tape;
  auto x = tape.input(Tensor({1, 5}, {1, 2, 3, 4, 9}));
  auto y = avgpool1d(x);
  const std::vector<double> seed{2.0, 4.0};
  tape.backward(y, seed);
  CHECK(to_vec(tape.grad(x)) == std::vector<double>{1, 1, 2, 2, 0});
}

TEST_CASE("affine examples") {
  Tape tape;
  auto x = tape.input(Tensor::vector({1, 1}));
  auto y = affine(x, tape.input(Tensor({2, 2}, {1, 2, 3, 4})), tape.input(Tensor::vector({0, 1})));
  CHECK(to_vec(y.value()) == std::vector<double>{3, 8});

  auto in = tape.input(Tensor::vector({0.3, -2.0}));
  auto id = affine(in, tape.input(Tensor({2, 2}, {1, 0, 0, 1})), tape.input(Tensor({2})));
  CHECK(to_vec(id.value()) == std::vector<double>{0.3, -2.0});

  auto zero = affine(in, tape.input(Tensor({2, 2})), tape.input(Tensor::vector({5, -7})));
  CHECK(to_vec(zero.value()) == std::vector<double>{5, -7});

  CHECK_THROWS_AS(affine(tape.input(Tensor::vector({1, 2, 3})), tape.input(Tensor({2, 2})), tape.input(Tensor({2}))),
                  ContractViolation);
}

TEST_CASE("relu forward and the guided backward rule") {
  {
    Tape tape;
    auto y = relu(tape.input(Tensor::vector({-1, 0, 2})));
    CHECK(to_vec(y.value()) == std::vector<double>{0, 0, 2});
  }
  for (GradMode mode : {GradMode::standard, GradMode::guided}) {
    Tape tape(mode);
    auto x = tape.input(Tensor::vector({2.0, -1.0}));
    auto y = relu(x);
    const std::vector<double> seed{-1.0, 5.0};
    tape.backward(y, seed);
    const double expected_active = mode == GradMode::standard ? -1.0 : 0.0;
    CHECK(tape.grad(x)[0] == expected_active);
    CHECK(tape.grad(x)[1] == 0.0);
  }
  Tape guided(GradMode::guided);
  auto x = guided.input(Tensor::vector({2.0}));
  auto y = relu(x);
  const std::vector<double> seed{3.0};
  guided.backward(y, seed);
  CHECK(guided.grad(x)[0] == 3.0);
}

TEST_CASE("lstm_cell_step: zero parameters and state") {
  Tape tape;
  auto x = tape.input(testing::random_tensor({3}, 4));
  auto h = tape.input(Tensor({2}));
  auto c = tape.input(Tensor({2}));
  LstmParams p{tape.input(Tensor({8, 5})), tape.input(Tensor({8}))};
  auto s = lstm_cell_step(x, h, c, p);
  for (double v : s.h.value()) CHECK(v == 0.0);
  for (double v : s.c.value()) CHECK(v == 0.0);
}

TEST_CASE("lstm_cell_step: saturated forget gate carries the cell") {
  Tape tape;
  auto x = tape.input(Tensor::vector({0.0}));
  auto h = tape.input(Tensor::vector({0.0}));
  auto c = tape.input(Tensor::vector({3.0}));
  // Gate order: input, forget, cell, output.
  LstmParams p{tape.input(Tensor({4, 2})), tape.input(Tensor::vector({0, 20, 0, 0}))};
  auto s = lstm_cell_step(x, h, c, p);
  CHECK(std::abs(s.c.item() - 3.0) < 1e-6);
  CHECK(std::abs(s.h.item() - 0.5 * std::tanh(s.c.item())) < 1e-12);
  CHECK(std::abs(s.h.item() - 0.5 * std::tanh(3.0)) < 1e-6);
}

TEST_CASE("lstm_cell_step matches a scalar oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = testing::random_tensor({4, 2}, 10 + seed, -2, 2);
    auto b = testing::random_tensor({4}, 50 + seed, -2, 2);
    auto st = testing::random_tensor({3}, 90 + seed, -2, 2);
    const double xv = st[0], hv = st[1], cv = st[2];
    auto pre = [&](std::size_t r) { return w[r * 2] * xv + w[r * 2 + 1] * hv + b[r]; };
    const double i = sigmoid_ref(pre(0)), f = sigmoid_ref(pre(1)), g = std::tanh(pre(2)), o = sigmoid_ref(pre(3));
    const double c_ref = f * cv + i * g;
    const double h_ref = o * std::tanh(c_ref);

    Tape tape;
    LstmParams p{tape.input(w), tape.input(b)};
    auto s = lstm_cell_step(tape.input(Tensor::vector({xv})), tape.input(Tensor::vector({hv})),
                            tape.input(Tensor::vector({cv})), p);
    CHECK(std::abs(s.c.item() - c_ref) < 1e-12);
    CHECK(std::abs(s.h.item() - h_ref) < 1e-12);
  }
}

TEST_CASE("lstm_cell_step rejects bad weight shapes") {
  Tape tape;
  LstmParams p{tape.input(Tensor({8, 4})), tape.input(Tensor({8}))};
  CHECK_THROWS_AS(lstm_cell_step(tape.input(Tensor({3})), tape.input(Tensor({2})), tape.input(Tensor({2})), p),
                  ContractViolation);
}

TEST_CASE("concat examples and backward offsets") {
  Tape tape;
  auto a = tape.input(Tensor::vector({1, 2}));
  auto b = tape.input(Tensor::vector({3}));
  auto y = concat({a, b});
  CHECK(to_vec(y.value()) == std::vector<double>{1, 2, 3});
  CHECK(to_vec(concat({a}).value()) == std::vector<double>{1, 2});
  const std::vector<double> seed{7, 8, 9};
  tape.backward(y, seed);
  CHECK(to_vec(tape.grad(a)) == std::vector<double>{7, 8});
  CHECK(to_vec(tape.grad(b)) == std::vector<double>{9});
  CHECK_THROWS_AS(concat(std::span<const Var>{}), ContractViolation);
}

TEST_CASE("backward examples") {
  for (GradMode mode : {GradMode::standard, GradMode::guided}) {
    Tape tape(mode);
    auto x = tape.input(Tensor::vector({2.0}));
    auto y = scale_shift(x, 3.0, 0.0);
    tape.backward(y);
    CHECK(tape.grad(x)[0] == 3.0);

    Tape t2(mode);
    auto x2 = t2.input(Tensor::vector({1.0}));
    auto y2 = relu(scale_shift(x2, -1.0, 0.0));
    t2.backward(y2);
    CHECK(t2.grad(x2)[0] == 0.0);
  }
}

TEST_CASE("backward rejects a seed from another tape") {
  Tape a, b;
  auto x = a.input(Tensor::vector({1.0}));
  auto y = b.input(Tensor::vector({1.0}));
  (void)x;
  CHECK_THROWS_AS(a.backward(y), ContractViolation);
}

TEST_CASE("shared subexpressions accumulate gradients") {
  Tape tape;
  auto x = tape.input(Tensor::vector({1.5, -0.5}));
  auto y = sum(add(mul(x, x), x));
  tape.backward(y);
  CHECK(to_vec(tape.grad(x)) == std::vector<double>{4.0, 0.0});
}

TEST_CASE("grad_check examples") {
  auto pt = testing::random_tensor({4}, 11);
  auto wt = testing::random_tensor({3, 4}, 12);
  auto bt = testing::random_tensor({3}, 13);
  auto proj = testing::random_tensor({3}, 14);
  auto affine_err = grad_check(
      [&](Tape& tape, std::span<const Var> v) { return dot(affine(v[0], v[1], v[2]), proj.values()); },
      {pt, wt, bt});
  CHECK(affine_err.max_relative_error < 1e-6);

  auto lstm_err = grad_check(
      [&](Tape& tape, std::span<const Var> v) {
        auto s = lstm_cell_step(v[0], v[1], v[2], LstmParams{v[3], v[4]});
        return add(sum(s.h), sum(s.c));
      },
      {testing::random_tensor({3}, 20), testing::random_tensor({2}, 21), testing::random_tensor({2}, 22),
       testing::random_tensor({8, 5}, 23), testing::random_tensor({8}, 24)});
  CHECK(lstm_err.max_relative_error < 1e-4);

  // Nudged away from ReLU kinks by the random draw.
  auto stack_proj = testing::random_tensor({3 * 4}, 30);
  auto stack_err = grad_check(
      [&](Tape& tape, std::span<const Var> v) {
        return dot(avgpool1d(relu(conv1d(v[0], v[1], v[2]))), stack_proj.values());
      },
      {testing::random_tensor({2, 8}, 31), testing::random_tensor({3, 2, 3}, 32), testing::random_tensor({3}, 33)});
  CHECK(stack_err.max_relative_error < 1e-4);
}

TEST_CASE("grad_check reports non-finite evaluations") {
  auto f = [](Tape& tape, Var x) {
    (void)tape;
    return scale_shift(sum(x), std::numeric_limits<double>::infinity(), 0.0);
  };
  CHECK_THROWS_AS(grad_check(f, Tensor::vector({1.0})), NumericalError);
}

TEST_CASE("mse_loss op value and gradient") {
  Tape tape;
  auto p = tape.input(Tensor::vector({1, 2}));
  const std::vector<double> targets{3, 2};
  auto l = mse_loss(p, targets);
  CHECK(l.item() == 2.0);
  tape.backward(l);
  CHECK(to_vec(tape.grad(p)) == std::vector<double>{-2.0, 0.0});
}

TEST_CASE("batch norm: single-sample training batch stays finite") {
  Tape tape;
  auto x = tape.input(Tensor({1, 3}, {1.0, -2.0, 4.0}));
  auto y = batch_norm_train(x, tape.input(Tensor::vector({1, 1, 1})), tape.input(Tensor::vector({0, 0, 0})), 1e-5);
  for (double v : y.value()) {
    CHECK(std::isfinite(v));
    CHECK(v == 0.0);
  }
}
