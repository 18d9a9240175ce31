#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "toc/classifier/classifier.hpp"
#include "toc/nn/loss.hpp"

using toc::nn::Mat;
using toc::nn::Tape;
using toc::nn::Var;
namespace cls = toc::classifier;

namespace {

Mat random_mat(int r, int c, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Mat m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

void zero_all(toc::nn::ParameterStore& store) {
  for (auto& p : store.all()) p.value.setZero();
}

}  // namespace

TEST_CASE("contextual states cover both directions") {
  std::mt19937_64 rng(3);
  toc::nn::ParameterStore store;
  auto p = cls::make_classifier(store, 8, 6, rng);

  Mat fused = random_mat(8, 5, 42);
  Tape t;
  const Mat g1 = cls::contextualize(t, p, t.input(fused)).value();
  REQUIRE(g1.rows() == 8);
  REQUIRE(g1.cols() == 5);

  // Changing the last entity must reach the first state through the backward
  // pass, and changing the first must reach the last through the forward pass.
  Mat fused2 = fused;
  fused2.col(4) = random_mat(8, 1, 43);
  Tape t2;
  const Mat g2 = cls::contextualize(t2, p, t2.input(fused2)).value();
  CHECK((g1.col(0) - g2.col(0)).cwiseAbs().maxCoeff() > 1e-12);

  Mat fused3 = fused;
  fused3.col(0) = random_mat(8, 1, 44);
  Tape t3;
  const Mat g3 = cls::contextualize(t3, p, t3.input(fused3)).value();
  CHECK((g1.col(4) - g3.col(4)).cwiseAbs().maxCoeff() > 1e-12);

  // A single entity and an empty document are both fine.
  Tape t4;
  CHECK(cls::contextualize(t4, p, t4.input(random_mat(8, 1, 45))).value().cols() == 1);
  Tape t5;
  CHECK(cls::contextualize(t5, p, t5.input(Mat(8, 0))).value().cols() == 0);
}

TEST_CASE("zeroed recurrence responds with the projection bias") {
  std::mt19937_64 rng(4);
  toc::nn::ParameterStore store;
  auto p = cls::make_classifier(store, 4, 3, rng);
  zero_all(store);
  Eigen::VectorXd beta(4);
  beta << 0.3, -0.7, 0.1, 2.0;
  p.proj.b->value = beta;
  p.head.b->value << 10.0, -10.0;

  Tape t;
  const Var g = cls::contextualize(t, p, t.input(random_mat(4, 6, 9)));
  for (int i = 0; i < 6; ++i)
    CHECK((g.value().col(i) - beta).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // Saturated logits land on a one-hot distribution.
  const Var probs = t.softmax_col(cls::heading_logits(t, p, g));
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(probs.value()(0, i) - 1.0) < 1e-8);
    CHECK(std::abs(probs.value()(1, i)) < 1e-8);
  }
}

TEST_CASE("focal term worked values") {
  CHECK(toc::nn::focal_scalar(0.9, 2.0, 1.0) == doctest::Approx(1.0536e-3).epsilon(1e-3));
  // Uniform scores over k candidates.
  for (int k = 2; k <= 6; ++k) {
    Tape t;
    const Var probs = t.input(Mat::Constant(k, 1, 1.0 / k));
    const Var l = toc::nn::focal_from_probs(t, probs, {0}, 2.0, 0.25);
    const double want = -0.25 * std::pow(1.0 - 1.0 / k, 2.0) * std::log(1.0 / k);
    CHECK(l.value()(0, 0) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("focal loss with gamma 0 and alpha 1 is cross-entropy") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kd(2, 6);
  std::uniform_real_distribution<double> ld(-4.0, 4.0);
  double max_diff = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = kd(rng);
    Mat logits(k, 1);
    for (int i = 0; i < k; ++i) logits(i, 0) = ld(rng);
    const int label = std::uniform_int_distribution<int>(0, k - 1)(rng);

    Tape t;
    const Var fl = toc::nn::focal_from_logits(t, t.input(logits), {label}, 0.0, 1.0);

    const Eigen::VectorXd ex = (logits.col(0).array() - logits.col(0).maxCoeff()).exp();
    const double ce = -std::log(ex(label) / ex.sum());
    max_diff = std::max(max_diff, std::abs(fl.value()(0, 0) - ce));
  }
  CHECK(max_diff < 1e-9);
}

TEST_CASE("classification loss gradients match finite differences") {
  std::mt19937_64 rng(6);
  toc::nn::ParameterStore store;
  auto p = cls::make_classifier(store, 8, 5, rng);
  const Mat fused = random_mat(8, 4, 10);
  const std::vector<bool> gold = {false, true, true, false};

  auto loss = [&]() {
    Tape t;
    const Var g = cls::contextualize(t, p, t.input(fused));
    const Var logits = cls::heading_logits(t, p, g);
    const Var l = cls::classification_loss(t, logits, gold, 2.0, 0.25);
    t.backward(l);
    return l.value()(0, 0);
  };
  const auto res = toc::testing::gradient_check(store, loss);
  CAPTURE(res.worst);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("heading prediction breaks ties toward body text") {
  Mat logits(2, 3);
  logits << 0.5, -1.0, 2.0,
            0.5, 1.0, -2.0;
  CHECK(cls::predict_headings(logits) == std::vector<bool>{false, true, false});
}
