#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sparsepat/autodiff.hpp"
#include "sparsepat/io.hpp"
#include "testers.hpp"

using namespace sparsepat;
using testers::random_tensor;

TEST_CASE("tensor shape/data invariant") {
  CHECK_THROWS_AS(TensorD({2, 3}, std::vector<double>(5)), InvalidArgument);
  TensorD t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.shape_string() == "(2,3)");
}

TEST_CASE("conv2d 1x1 kernel scales values") {
  Rng rng(1);
  TensorD x = random_tensor<double>(rng, {1, 1, 4, 4});
  Tape<double> tape;
  auto w = tape.value(TensorD({1, 1, 1, 1}, {2.0}));
  auto b = tape.value(TensorD({1}, {0.0}));
  auto y = tape.conv2d(tape.value(x), w, b, 1, 0);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y->value[i] == doctest::Approx(2.0 * x[i]));
}

TEST_CASE("conv2d stamps kernel at impulse") {
  TensorD x({1, 1, 5, 5});
  x.at4(0, 0, 2, 2) = 1.0;
  Rng rng(2);
  TensorD w = random_tensor<double>(rng, {1, 1, 3, 3});
  Tape<double> tape;
  auto y = tape.conv2d(tape.value(x), tape.value(w), tape.value(TensorD({1})), 1, 1);
  // cross-correlation: the delta stamps the kernel mirrored about the impulse
  for (int64_t ky = 0; ky < 3; ++ky)
    for (int64_t kx = 0; kx < 3; ++kx)
      CHECK(y->value.at4(0, 0, 1 + ky, 1 + kx) == doctest::Approx(w.at4(0, 0, 2 - ky, 2 - kx)));
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(3);
  TensorD x = random_tensor<double>(rng, {1, 2, 5, 5});
  TensorD w = random_tensor<double>(rng, {3, 2, 3, 3});
  std::vector<double> bias = {0.3, -0.2, 0.9};
  Tape<double> tape;
  auto y = tape.conv2d(tape.value(x), tape.value(w),
                       tape.value(TensorD({3}, std::vector<double>(bias))), 1, 1);
  TensorD ref = testers::conv2d_reference(x, w, bias, 1, 1);
  REQUIRE(y->value.shape() == ref.shape());
  for (int64_t i = 0; i < ref.numel(); ++i)
    CHECK(std::abs(y->value[i] - ref[i]) < 1e-12);
}

TEST_CASE("conv2d oracle sweep over shapes, strides and pads") {
  Rng rng(4);
  for (int64_t bs : {1, 2}) {
    for (int64_t ci : {1, 3}) {
      for (int64_t co : {1, 2}) {
        for (int hw : {7, 9}) {
          for (int stride : {1, 2}) {
            for (int pad : {0, 1}) {
              TensorD x = random_tensor<double>(rng, {bs, ci, hw, hw});
              TensorD w = random_tensor<double>(rng, {co, ci, 3, 3});
              std::vector<double> bias;
              for (int64_t i = 0; i < co; ++i) bias.push_back(rng.uniform(-1, 1));
              Tape<double> tape;
              auto y = tape.conv2d(tape.value(x), tape.value(w),
                                   tape.value(TensorD({co}, std::vector<double>(bias))),
                                   stride, pad);
              TensorD ref = testers::conv2d_reference(x, w, bias, stride, pad);
              REQUIRE(y->value.shape() == ref.shape());
              double worst = 0;
              for (int64_t i = 0; i < ref.numel(); ++i)
                worst = std::max(worst, std::abs(y->value[i] - ref[i]));
              CHECK(worst < 1e-12);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("conv2d rejects mismatched channels with a dimension report") {
  Tape<double> tape;
  auto x = tape.value(TensorD({1, 2, 4, 4}));
  auto w = tape.value(TensorD({1, 3, 3, 3}));
  auto b = tape.value(TensorD({1}));
  CHECK_THROWS_WITH_AS(tape.conv2d(x, w, b, 1, 1), doctest::Contains("channel mismatch"),
                       InvalidArgument);
}

TEST_CASE("conv2d gradient matches finite differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    TensorD x0 = random_tensor<double>(rng, {2, 2, 6, 6});
    TensorD w0 = random_tensor<double>(rng, {3, 2, 3, 3});
    TensorD b0 = random_tensor<double>(rng, {3});
    TensorD target = random_tensor<double>(rng, {2, 3, 6, 6});

    auto loss_xwb = [&](const TensorD& x, const TensorD& w, const TensorD& b) {
      Tape<double> tape;
      auto out = tape.conv2d(tape.value(x), tape.value(w), tape.value(b), 1, 1);
      return tape.mse_loss(out, tape.value(target))->value[0];
    };
    Tape<double> tape;
    auto xv = tape.leaf(x0, true);
    auto wv = tape.leaf(w0, true);
    auto bv = tape.leaf(b0, true);
    auto loss = tape.mse_loss(tape.conv2d(xv, wv, bv, 1, 1), tape.value(target));
    tape.backward(loss);

    CHECK(testers::gradient_check([&](const TensorD& x) { return loss_xwb(x, w0, b0); }, x0,
                                  xv->grad) < 1e-4);
    CHECK(testers::gradient_check([&](const TensorD& w) { return loss_xwb(x0, w, b0); }, w0,
                                  wv->grad) < 1e-4);
    CHECK(testers::gradient_check([&](const TensorD& b) { return loss_xwb(x0, w0, b); }, b0,
                                  bv->grad) < 1e-4);
  }
}

TEST_CASE("batch_norm gamma=0 yields beta everywhere") {
  Rng rng(5);
  TensorD x = random_tensor<double>(rng, {2, 3, 4, 4});
  BatchNormState<double> state;
  Tape<double> tape;
  auto y = tape.batch_norm(tape.value(x), tape.value(TensorD({3})),
                           tape.value(TensorD({3}, {1.0, -2.0, 0.5})), state, Mode::kTrain);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 16; ++i)
        CHECK(y->value[(b * 3 + c) * 16 + i] ==
              doctest::Approx(c == 0 ? 1.0 : (c == 1 ? -2.0 : 0.5)));
}

TEST_CASE("batch_norm on normalized data is near identity") {
  TensorD x({1, 1, 2, 2}, {1.0, -1.0, 1.0, -1.0});  // zero mean, unit variance
  BatchNormState<double> state;
  Tape<double> tape;
  auto y = tape.batch_norm(tape.value(x), tape.value(TensorD::full({1}, 1.0)),
                           tape.value(TensorD({1})), state, Mode::kTrain);
  for (int64_t i = 0; i < 4; ++i) CHECK(y->value[i] == doctest::Approx(x[i]).epsilon(1e-4));
}

TEST_CASE("batch_norm eval without stats is rejected, with stats works") {
  TensorD x({1, 2, 2, 2});
  BatchNormState<double> empty;
  Tape<double> tape;
  auto g = tape.value(TensorD::full({2}, 1.0));
  auto b = tape.value(TensorD({2}));
  CHECK_THROWS_AS(tape.batch_norm(tape.value(x), g, b, empty, Mode::kEval), InvalidArgument);
  BatchNormState<double> unit = BatchNormState<double>::unit(2);
  CHECK_NOTHROW(tape.batch_norm(tape.value(x), g, b, unit, Mode::kEval));
}

TEST_CASE("batch_norm running stats follow the moving average") {
  TensorD x({1, 1, 2, 2}, {1.0, 3.0, 5.0, 7.0});  // mean 4, unbiased var 20/3
  BatchNormState<double> state;
  Tape<double> tape;
  tape.batch_norm(tape.value(x), tape.value(TensorD::full({1}, 1.0)),
                  tape.value(TensorD({1})), state, Mode::kTrain, 0.1);
  CHECK(state.mean[0] == doctest::Approx(0.1 * 4.0));
  CHECK(state.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * (20.0 / 3.0)));
}

TEST_CASE("batch_norm gradient matches finite differences (train and eval)") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(200 + seed);
    TensorD x0 = random_tensor<double>(rng, {2, 3, 4, 4});
    TensorD g0 = random_tensor<double>(rng, {3}, 0.5, 1.5);
    TensorD b0 = random_tensor<double>(rng, {3});
    TensorD target = random_tensor<double>(rng, {2, 3, 4, 4});
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      BatchNormState<double> base = BatchNormState<double>::unit(3);
      base.mean = {0.1, -0.2, 0.3};
      base.var = {1.5, 0.7, 2.0};
      auto loss_fn = [&](const TensorD& x, const TensorD& g, const TensorD& b) {
        BatchNormState<double> s = base;  // fresh copy per evaluation
        Tape<double> tape;
        auto out = tape.batch_norm(tape.value(x), tape.value(g), tape.value(b), s, mode);
        return tape.mse_loss(out, tape.value(target))->value[0];
      };
      BatchNormState<double> s = base;
      Tape<double> tape;
      auto xv = tape.leaf(x0, true);
      auto gv = tape.leaf(g0, true);
      auto bv = tape.leaf(b0, true);
      auto loss = tape.mse_loss(tape.batch_norm(xv, gv, bv, s, mode), tape.value(target));
      tape.backward(loss);
      CHECK(testers::gradient_check([&](const TensorD& x) { return loss_fn(x, g0, b0); }, x0,
                                    xv->grad) < 1e-4);
      CHECK(testers::gradient_check([&](const TensorD& g) { return loss_fn(x0, g, b0); }, g0,
                                    gv->grad) < 1e-4);
      CHECK(testers::gradient_check([&](const TensorD& b) { return loss_fn(x0, g0, b); }, b0,
                                    bv->grad) < 1e-4);
    }
  }
}

TEST_CASE("relu basics and gradient mask") {
  TensorD x({1, 1, 2, 2}, {-1.0, 2.0, 0.0, -3.0});
  Tape<double> tape;
  auto in = tape.leaf(x, true);
  auto y = tape.relu(in);
  CHECK(y->value[0] == 0.0);
  CHECK(y->value[1] == 2.0);
  CHECK(y->value[2] == 0.0);
  CHECK(y->value[3] == 0.0);
  auto loss = tape.sum(y);
  tape.backward(loss);
  CHECK(in->grad[0] == 0.0);
  CHECK(in->grad[1] == 1.0);  // indicator(input > 0)
  CHECK(in->grad[2] == 0.0);  // gradient at exactly zero is zero
  CHECK(in->grad[3] == 0.0);
}

TEST_CASE("max_pool2 basics") {
  TensorD x({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tape<double> tape;
  auto y = tape.max_pool2(tape.value(x));
  CHECK(y->value.numel() == 1);
  CHECK(y->value[0] == 4.0);

  TensorD c = TensorD::full({1, 2, 4, 4}, 3.25);
  auto yc = tape.max_pool2(tape.value(c));
  for (int64_t i = 0; i < yc->value.numel(); ++i) CHECK(yc->value[i] == 3.25);

  CHECK_THROWS_AS(tape.max_pool2(tape.value(TensorD({1, 1, 3, 4}))), InvalidArgument);
}

TEST_CASE("max_pool2 ties route to the first window slot and gradient checks out") {
  TensorD x = TensorD::full({1, 1, 2, 2}, 7.0);
  Tape<double> tape;
  auto in = tape.leaf(x, true);
  auto loss = tape.sum(tape.max_pool2(in));
  tape.backward(loss);
  CHECK(in->grad[0] == 1.0);  // row-major first occurrence
  CHECK(in->grad[1] == 0.0);
  CHECK(in->grad[2] == 0.0);
  CHECK(in->grad[3] == 0.0);

  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(300 + seed);
    TensorD x0 = random_tensor<double>(rng, {2, 2, 6, 6});
    TensorD target = random_tensor<double>(rng, {2, 2, 3, 3});
    auto f = [&](const TensorD& x) {
      Tape<double> t;
      return t.mse_loss(t.max_pool2(t.value(x)), t.value(target))->value[0];
    };
    Tape<double> t;
    auto xv = t.leaf(x0, true);
    auto loss2 = t.mse_loss(t.max_pool2(xv), t.value(target));
    t.backward(loss2);
    CHECK(testers::gradient_check(f, x0, xv->grad) < 1e-4);
  }
}

TEST_CASE("up_conv2 doubles spatial dims and broadcasts a 1x1 input") {
  TensorD x({1, 1, 1, 1}, {3.0});
  TensorD w = TensorD::full({1, 1, 2, 2}, 1.0);
  Tape<double> tape;
  auto y = tape.up_conv2(tape.value(x), tape.value(w), tape.value(TensorD({1})));
  REQUIRE(y->value.shape() == std::vector<int64_t>{1, 1, 2, 2});
  for (int64_t i = 0; i < 4; ++i) CHECK(y->value[i] == 3.0);

  Rng rng(6);
  TensorD x2 = random_tensor<double>(rng, {2, 3, 5, 7});
  TensorD w2 = random_tensor<double>(rng, {3, 2, 2, 2});
  auto y2 = tape.up_conv2(tape.value(x2), tape.value(w2), tape.value(TensorD({2})));
  CHECK(y2->value.shape() == std::vector<int64_t>{2, 2, 10, 14});
}

TEST_CASE("up_conv2 is the adjoint of the stride-2 conv") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(400 + seed);
    const int64_t c1 = 3, c2 = 2;
    TensorD x = random_tensor<double>(rng, {1, c1, 8, 8});
    TensorD y = random_tensor<double>(rng, {1, c2, 4, 4});
    TensorD w = random_tensor<double>(rng, {c2, c1, 2, 2});
    TensorD zero_c2({c2}), zero_c1({c1});
    Tape<double> tape;
    auto conv = tape.conv2d(tape.value(x), tape.value(w), tape.value(zero_c2), 2, 0);
    // the same weight buffer read as (in=c2, out=c1, 2, 2)
    TensorD w_up({c2, c1, 2, 2}, std::vector<double>(w.vec().begin(), w.vec().end()));
    auto up = tape.up_conv2(tape.value(y), tape.value(w_up), tape.value(zero_c1));
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < conv->value.numel(); ++i) lhs += conv->value[i] * y[i];
    for (int64_t i = 0; i < up->value.numel(); ++i) rhs += up->value[i] * x[i];
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("up_conv2 gradient matches finite differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(500 + seed);
    TensorD x0 = random_tensor<double>(rng, {2, 2, 4, 4});
    TensorD w0 = random_tensor<double>(rng, {2, 3, 2, 2});
    TensorD b0 = random_tensor<double>(rng, {3});
    TensorD target = random_tensor<double>(rng, {2, 3, 8, 8});
    auto f = [&](const TensorD& x, const TensorD& w, const TensorD& b) {
      Tape<double> t;
      return t.mse_loss(t.up_conv2(t.value(x), t.value(w), t.value(b)), t.value(target))
          ->value[0];
    };
    Tape<double> t;
    auto xv = t.leaf(x0, true);
    auto wv = t.leaf(w0, true);
    auto bv = t.leaf(b0, true);
    auto loss = t.mse_loss(t.up_conv2(xv, wv, bv), t.value(target));
    t.backward(loss);
    CHECK(testers::gradient_check([&](const TensorD& v) { return f(v, w0, b0); }, x0,
                                  xv->grad) < 1e-4);
    CHECK(testers::gradient_check([&](const TensorD& v) { return f(x0, v, b0); }, w0,
                                  wv->grad) < 1e-4);
    CHECK(testers::gradient_check([&](const TensorD& v) { return f(x0, w0, v); }, b0,
                                  bv->grad) < 1e-4);
  }
}

TEST_CASE("concat_channels shape algebra, identity, and splitting") {
  Rng rng(7);
  TensorD a = random_tensor<double>(rng, {1, 3, 8, 8});
  TensorD b = random_tensor<double>(rng, {1, 5, 8, 8});
  Tape<double> tape;
  auto y = tape.concat_channels(tape.value(a), tape.value(b));
  REQUIRE(y->value.shape() == std::vector<int64_t>{1, 8, 8, 8});
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(y->value[i] == a[i]);  // channels [0..3)

  auto e = tape.concat_channels(tape.value(a), tape.value(TensorD({1, 0, 8, 8})));
  CHECK(e->value.shape() == a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(e->value[i] == a[i]);

  CHECK_THROWS_AS(tape.concat_channels(tape.value(a), tape.value(TensorD({1, 2, 4, 8}))),
                  InvalidArgument);
}

TEST_CASE("concat_channels backward splits the gradient") {
  Rng rng(14);
  TensorD a0 = random_tensor<double>(rng, {1, 2, 4, 4});
  TensorD b0 = random_tensor<double>(rng, {1, 3, 4, 4});
  TensorD target = random_tensor<double>(rng, {1, 5, 4, 4});
  Tape<double> tape;
  auto av = tape.leaf(a0, true);
  auto bv = tape.leaf(b0, true);
  auto loss = tape.mse_loss(tape.concat_channels(av, bv), tape.value(target));
  tape.backward(loss);
  auto f_a = [&](const TensorD& a) {
    Tape<double> t;
    return t.mse_loss(t.concat_channels(t.value(a), t.value(b0)), t.value(target))->value[0];
  };
  auto f_b = [&](const TensorD& b) {
    Tape<double> t;
    return t.mse_loss(t.concat_channels(t.value(a0), t.value(b)), t.value(target))->value[0];
  };
  CHECK(testers::gradient_check(f_a, a0, av->grad) < 1e-4);
  CHECK(testers::gradient_check(f_b, b0, bv->grad) < 1e-4);
}

TEST_CASE("add basics and gradients") {
  Rng rng(8);
  TensorD x = random_tensor<double>(rng, {2, 1, 4, 4});
  TensorD zero({2, 1, 4, 4});
  TensorD neg = x;
  for (int64_t i = 0; i < neg.numel(); ++i) neg[i] = -neg[i];
  Tape<double> tape;
  auto same = tape.add(tape.value(x), tape.value(zero));
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(same->value[i] == x[i]);
  auto cancel = tape.add(tape.value(x), tape.value(neg));
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(cancel->value[i] == 0.0);
  CHECK_THROWS_AS(tape.add(tape.value(x), tape.value(TensorD({1, 1, 4, 4}))),
                  InvalidArgument);

  auto a = tape.leaf(x, true);
  auto b = tape.leaf(zero, true);
  auto loss = tape.sum(tape.add(a, b));
  tape.backward(loss);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(a->grad[i] == 1.0);
    CHECK(b->grad[i] == 1.0);
  }
}

TEST_CASE("mse_loss values and gradient") {
  Rng rng(9);
  TensorD a = random_tensor<double>(rng, {1, 1, 4, 4});
  Tape<double> tape;
  CHECK(tape.mse_loss(tape.value(a), tape.value(a))->value[0] == 0.0);

  TensorD b = a;
  for (int64_t i = 0; i < b.numel(); ++i) b[i] += 0.1;
  CHECK(tape.mse_loss(tape.value(a), tape.value(b))->value[0] == doctest::Approx(0.01));
  CHECK_THROWS_AS(tape.mse_loss(tape.value(a), tape.value(TensorD({1, 1, 2, 2}))),
                  InvalidArgument);

  TensorD target = random_tensor<double>(rng, {1, 1, 4, 4});
  auto f = [&](const TensorD& x) {
    Tape<double> t;
    return t.mse_loss(t.value(x), t.value(target))->value[0];
  };
  Tape<double> t;
  auto xv = t.leaf(a, true);
  auto loss = t.mse_loss(xv, t.value(target));
  t.backward(loss);
  for (int64_t i = 0; i < a.numel(); ++i)
    CHECK(xv->grad[i] == doctest::Approx(2.0 * (a[i] - target[i]) / a.numel()));
  CHECK(testers::gradient_check(f, a, xv->grad) < 1e-4);
}

TEST_CASE("backward: sum of weights gives all-ones gradient; unreachable params zero") {
  Rng rng(10);
  Parameter<double> w(random_tensor<double>(rng, {2, 3}));
  Parameter<double> unused(random_tensor<double>(rng, {4}));
  Tape<double> tape;
  auto loss = tape.sum(tape.param(w));
  tape.param(unused);  // bound but unreachable from the loss
  tape.backward(loss);
  for (int64_t i = 0; i < w.grad.numel(); ++i) CHECK(w.grad[i] == 1.0);
  for (int64_t i = 0; i < unused.grad.numel(); ++i) CHECK(unused.grad[i] == 0.0);

  CHECK_THROWS_AS(tape.backward(tape.value(TensorD({1, 1, 2, 2}))), InvalidArgument);
}

TEST_CASE("composed conv->relu->mse gradient matches finite differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(600 + seed);
    TensorD x0 = random_tensor<double>(rng, {2, 2, 6, 6});
    TensorD w0 = random_tensor<double>(rng, {2, 2, 3, 3});
    TensorD b0 = random_tensor<double>(rng, {2});
    TensorD target = random_tensor<double>(rng, {2, 2, 6, 6});
    auto f = [&](const TensorD& w) {
      Tape<double> t;
      auto out = t.relu(t.conv2d(t.value(x0), t.value(w), t.value(b0), 1, 1));
      return t.mse_loss(out, t.value(target))->value[0];
    };
    Tape<double> t;
    auto wv = t.leaf(w0, true);
    auto loss =
        t.mse_loss(t.relu(t.conv2d(t.value(x0), wv, t.value(b0), 1, 1)), t.value(target));
    t.backward(loss);
    CHECK(testers::gradient_check(f, w0, wv->grad) < 1e-4);
  }
}

TEST_CASE("two backward passes with reset produce identical gradients") {
  Rng rng(11);
  TensorD x0 = random_tensor<double>(rng, {1, 2, 4, 4});
  TensorD w0 = random_tensor<double>(rng, {2, 2, 3, 3});
  TensorD target = random_tensor<double>(rng, {1, 2, 4, 4});
  auto run = [&]() {
    Parameter<double> w(w0);
    Tape<double> tape;
    auto loss = tape.mse_loss(
        tape.conv2d(tape.value(x0), tape.param(w), tape.value(TensorD({2})), 1, 1),
        tape.value(target));
    tape.backward(loss);
    return w.grad;
  };
  TensorD g1 = run();
  TensorD g2 = run();
  for (int64_t i = 0; i < g1.numel(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("forward operations are pure (bit-identical reruns)") {
  Rng rng(12);
  TensorD x = random_tensor<double>(rng, {2, 3, 8, 8});
  TensorD w = random_tensor<double>(rng, {4, 3, 3, 3});
  TensorD b = random_tensor<double>(rng, {4});
  auto run = [&]() {
    Tape<double> tape;
    auto y = tape.relu(tape.conv2d(tape.value(x), tape.value(w), tape.value(b), 1, 1));
    return tape.max_pool2(y)->value;
  };
  TensorD a = run(), c = run();
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("PTNS round trip preserves tensors bit-exactly") {
  Rng rng(13);
  TensorF tf = random_tensor<float>(rng, {3, 5, 2});
  const std::string path = "/tmp/sparsepat_test_tensor.ptns";
  write_ptns(path, tf);
  CHECK(peek_ptns_dtype(path) == PtnsDtype::kF32);
  TensorF back = read_ptns_f32(path);
  REQUIRE(back.shape() == tf.shape());
  for (int64_t i = 0; i < tf.numel(); ++i) CHECK(back[i] == tf[i]);

  TensorD td = random_tensor<double>(rng, {7});
  write_ptns(path, td);
  CHECK(peek_ptns_dtype(path) == PtnsDtype::kF64);
  TensorD back_d = read_ptns_f64(path);
  for (int64_t i = 0; i < td.numel(); ++i) CHECK(back_d[i] == td[i]);
}
