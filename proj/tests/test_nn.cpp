#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/gradcheck.hpp"
#include "toc/nn/layers.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

using toc::nn::Adam;
using toc::nn::Init;
using toc::nn::Mat;
using toc::nn::ParameterStore;
using toc::nn::Tape;
using toc::nn::Var;
using toc::testing::gradient_check;

namespace {

Mat random_mat(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("elementwise and matmul backward match finite differences") {
  std::mt19937_64 rng(11);
  ParameterStore store;
  auto* A = store.create("A", 4, 3, Init::XavierUniform, rng);
  auto* B = store.create("B", 3, 5, Init::XavierUniform, rng);
  auto* c = store.create("c", 4, 1, Init::SmallNormal, rng);

  auto loss = [&]() {
    Tape t;
    Var a = t.param(*A), b = t.param(*B), bias = t.param(*c);
    Var y = t.add_bias(t.matmul(a, b), bias);
    Var z = t.cmul(t.tanh(y), t.sigmoid(y));
    Var l = t.mean_all(t.cmul(z, z));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax, pick, clamp, pow, log compose into a differentiable focal term") {
  std::mt19937_64 rng(12);
  ParameterStore store;
  auto* W = store.create("W", 5, 4, Init::XavierUniform, rng);
  Mat x = random_mat(4, 1, rng);

  auto loss = [&]() {
    Tape t;
    Var logits = t.matmul(t.param(*W), t.input(x));
    Var p = t.softmax_col(logits);
    Var pt = t.clamp(t.pick(p, 2, 0), 1e-7, 1.0 - 1e-7);
    Var one = t.input(Mat::Ones(1, 1));
    Var fl = t.scale(t.cmul(t.pow_const(t.sub(one, pt), 2.0), t.log(pt)), -0.25);
    t.backward(fl);
    return fl.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("masked softmax normalizes over the valid set only") {
  Tape t;
  Mat e(4, 1);
  e << 1.0, 2.0, 3.0, 4.0;
  Var p = t.softmax_masked(t.input(e), {1, 1, 0, 0});
  CHECK(p.value()(2, 0) == 0.0);
  CHECK(p.value()(3, 0) == 0.0);
  CHECK(p.value()(0, 0) + p.value()(1, 0) == doctest::Approx(1.0));
  CHECK(p.value()(1, 0) / p.value()(0, 0) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("masked softmax backward matches finite differences") {
  std::mt19937_64 rng(13);
  ParameterStore store;
  auto* W = store.create("W", 6, 3, Init::XavierUniform, rng);
  Mat x = random_mat(3, 1, rng);
  std::vector<std::uint8_t> valid = {1, 0, 1, 1, 0, 1};

  auto loss = [&]() {
    Tape t;
    Var e = t.matmul(t.param(*W), t.input(x));
    Var p = t.softmax_masked(e, valid);
    Var l = t.neg(t.log(t.clamp(t.pick(p, 3, 0), 1e-12, 1.0)));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("layer norm backward matches finite differences") {
  std::mt19937_64 rng(14);
  ParameterStore store;
  auto* X = store.create("X", 6, 4, Init::XavierUniform, rng);
  auto* g = store.create("g", 6, 1, Init::One, rng);
  auto* b = store.create("b", 6, 1, Init::SmallNormal, rng);

  auto loss = [&]() {
    Tape t;
    Var y = t.layer_norm_cols(t.param(*X), t.param(*g), t.param(*b));
    Var l = t.mean_all(t.cmul(y, t.sigmoid(y)));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gru cell backward matches finite differences") {
  std::mt19937_64 rng(15);
  ParameterStore store;
  auto gru = toc::nn::make_gru(store, "gru", 3, 4, rng);
  std::vector<Mat> xs = {random_mat(3, 1, rng), random_mat(3, 1, rng), random_mat(3, 1, rng)};

  auto loss = [&]() {
    Tape t;
    std::vector<Var> inputs;
    for (const Mat& x : xs) inputs.push_back(t.input(x));
    auto hs = toc::nn::gru_sequence(t, gru, inputs);
    Var l = t.mean_all(t.cmul(hs.back(), hs[1]));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("transformer layer backward matches finite differences") {
  std::mt19937_64 rng(16);
  ParameterStore store;
  auto layer = toc::nn::make_transformer_layer(store, "tf", 8, 2, 12, rng);
  Mat X = random_mat(8, 5, rng);

  auto loss = [&]() {
    Tape t;
    Var y = toc::nn::transformer_layer(t, layer, t.input(X));
    Var l = t.mean_all(t.cmul(y, y));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("conv1d over a selection history matches finite differences") {
  std::mt19937_64 rng(17);
  ParameterStore store;
  auto* Q = store.create("Q", 5, 3, Init::XavierUniform, rng);
  Mat hist(1, 6);
  hist << 1, 0, 2, 0, 0, 1;

  auto loss = [&]() {
    Tape t;
    Var d = t.conv1d_cols(t.param(*Q), t.input(hist));
    Var l = t.mean_all(t.tanh(d));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("conv2d matches a naive direct convolution and its gradients check out") {
  std::mt19937_64 rng(18);
  const int H = 5, W = 6, cin = 2, cout = 3, k = 3, stride = 2, pad = 1;
  ParameterStore store;
  auto* Wp = store.create("W", cout, cin * k * k, Init::XavierUniform, rng);
  auto* bp = store.create("b", cout, 1, Init::SmallNormal, rng);
  Mat x = random_mat(cin, H * W, rng);

  const int Ho = Tape::conv_out_dim(H, k, stride, pad);
  const int Wo = Tape::conv_out_dim(W, k, stride, pad);

  Tape t;
  Var y = t.conv2d(t.input(x), t.param(*Wp), t.param(*bp), H, W, k, stride, pad);

  // direct reference
  for (int oc = 0; oc < cout; ++oc)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = bp->value(oc, 0);
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int iy = oy * stride + ky - pad;
              int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += Wp->value(oc, ic * k * k + ky * k + kx) * x(ic, iy * W + ix);
            }
        CHECK(y.value()(oc, oy * Wo + ox) == doctest::Approx(acc).epsilon(1e-12));
      }

  auto loss = [&]() {
    Tape t2;
    Var y2 = t2.conv2d(t2.input(x), t2.param(*Wp), t2.param(*bp), H, W, k, stride, pad);
    Var l = t2.mean_all(t2.cmul(y2, t2.sigmoid(y2)));
    t2.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("conv2d propagates gradients into its input") {
  std::mt19937_64 rng(19);
  const int H = 4, W = 4, k = 3;
  ParameterStore store;
  auto* X = store.create("X", 1, H * W, Init::XavierUniform, rng);
  Mat w = random_mat(2, 9, rng);
  Mat b = Mat::Zero(2, 1);

  auto loss = [&]() {
    Tape t;
    Var y = t.conv2d(t.param(*X), t.input(w), t.input(b), H, W, k, 1, 1);
    Var l = t.mean_all(t.tanh(y));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("upsample2 and roi_align gradients check out") {
  std::mt19937_64 rng(20);
  const int H = 4, W = 4;
  ParameterStore store;
  auto* X = store.create("X", 3, H * W, Init::XavierUniform, rng);
  std::vector<Tape::RoiBox> boxes = {{0.5, 0.5, 3.0, 2.5}, {1.0, 1.5, 6.5, 7.2}};

  auto loss = [&]() {
    Tape t;
    Var up = t.upsample2(t.param(*X), H, W);
    Var pooled = t.roi_align(up, 2 * H, 2 * W, boxes, 3);
    Var l = t.mean_all(t.cmul(pooled, t.sigmoid(pooled)));
    t.backward(l);
    return l.value()(0, 0);
  };
  auto res = gradient_check(store, loss);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("adam reduces a quadratic and cosine schedule hits both ends") {
  std::mt19937_64 rng(21);
  ParameterStore store;
  auto* w = store.create("w", 4, 1, Init::XavierUniform, rng);
  Mat target = random_mat(4, 1, rng);
  Adam adam;
  double first = -1, last = -1;
  for (int step = 0; step < 300; ++step) {
    store.zero_grad();
    Tape t;
    Var diff = t.sub(t.param(*w), t.input(target));
    Var l = t.mean_all(t.cmul(diff, diff));
    t.backward(l);
    if (step == 0) first = l.value()(0, 0);
    last = l.value()(0, 0);
    adam.step(store, 0.05);
  }
  CHECK(last < first * 1e-3);

  CHECK(toc::nn::cosine_lr(0, 100, 5e-4, 1e-6) == doctest::Approx(5e-4));
  CHECK(toc::nn::cosine_lr(99, 100, 5e-4, 1e-6) == doctest::Approx(1e-6));
  CHECK(toc::nn::cosine_lr(50, 100, 5e-4, 1e-6) < 5e-4);
}

TEST_CASE("positional encodings distinguish positions") {
  Mat pe = toc::nn::positional_encoding(8, 4);
  CHECK((pe.col(0) - pe.col(1)).norm() > 1e-3);
  CHECK((pe.col(1) - pe.col(3)).norm() > 1e-3);
  CHECK(pe.array().abs().maxCoeff() <= 1.0 + 1e-12);
}
