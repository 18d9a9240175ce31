#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/gradcheck.hpp"
#include "toc/encoder/fusion.hpp"
#include "toc/encoder/layout.hpp"
#include "toc/encoder/text.hpp"
#include "toc/encoder/vision.hpp"

using toc::nn::Mat;
using toc::nn::Tape;
using toc::nn::Var;
namespace enc = toc::encoder;

namespace {

toc::Document three_line_doc() {
  std::vector<toc::Entity> es(3);
  es[0].content = "above";
  es[0].box = {10, 5, 60, 12};
  es[1].content = "target";
  es[1].box = {10, 20, 60, 30};
  es[2].content = "below";
  es[2].box = {10, 36, 60, 44};
  for (auto& e : es) e.page = 0;
  return toc::order_entities(es, {{100.0, 200.0, nullptr}}, "layout-example");
}

}  // namespace

TEST_CASE("layout features reproduce the worked example") {
  const toc::Document doc = three_line_doc();
  const enc::LayoutStats stats{50.0, 10.0};
  const Mat f = enc::layout_features(doc, stats);
  REQUIRE(f.cols() == 3);
  const Eigen::VectorXd got = f.col(1);
  Eigen::VectorXd want(8);
  want << 0.1, 0.1, 0.6, 0.15, 1.0, 1.0, 0.8, 0.6;
  CHECK((got - want).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("page edges stand in for missing neighbours") {
  std::vector<toc::Entity> es(1);
  es[0].content = "only";
  es[0].box = {10, 20, 60, 30};
  es[0].page = 0;
  const auto doc = toc::order_entities(es, {{100.0, 200.0, nullptr}}, "single");
  const Mat f = enc::layout_features(doc, {50.0, 10.0});
  CHECK(f(6, 0) == doctest::Approx(2.0));    // gap to the page top: (20-0)/10
  CHECK(f(7, 0) == doctest::Approx(17.0));   // gap to the page bottom: (200-30)/10
}

TEST_CASE("layout stats are per-document box means") {
  const auto doc = three_line_doc();
  const auto st = enc::compute_layout_stats(doc);
  CHECK(st.mean_width == doctest::Approx(50.0));
  CHECK(st.mean_height == doctest::Approx((7.0 + 10.0 + 8.0) / 3.0));
}

TEST_CASE("hash-bag embedding is deterministic, unit-norm, and seed-sensitive") {
  const enc::HashBagEmbedder a(64, 1), b(64, 1), c(64, 2);
  const Eigen::VectorXd v1 = a.embed("Section One Overview");
  CHECK(v1.norm() == doctest::Approx(1.0));
  CHECK((v1 - b.embed("Section One Overview")).norm() == doctest::Approx(0.0));
  CHECK((v1 - c.embed("Section One Overview")).norm() > 1e-6);
  CHECK(a.embed("").norm() == doctest::Approx(1.0));
  CHECK(a.embed("   ").norm() == doctest::Approx(1.0));
  CHECK((a.embed("") - a.embed(" \t ")).norm() == doctest::Approx(0.0));
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK_THROWS(enc::HashBagEmbedder(1));
}

TEST_CASE("gated fusion gradients match finite differences") {
  std::mt19937_64 rng(11);
  toc::nn::ParameterStore store;
  const int d = 8, n = 3;
  auto fp = enc::make_fusion(store, d, 8, rng);
  auto* fv = store.create("t.fv", d, n, toc::nn::Init::SmallNormal, rng);
  auto* fs = store.create("t.fs", d, n, toc::nn::Init::SmallNormal, rng);
  auto* fl = store.create("t.fp", 8, n, toc::nn::Init::SmallNormal, rng);

  for (auto kind : {enc::FusionKind::Gated, enc::FusionKind::Dot, enc::FusionKind::Add,
                    enc::FusionKind::Concat}) {
    CAPTURE(enc::to_string(kind));
    auto loss = [&]() {
      Tape t;
      Var f = enc::fuse(t, fp, kind, enc::ModalityMask::Full, t.param(*fv), t.param(*fs),
                        t.param(*fl));
      Var l = t.mean_all(t.cmul(f, f));
      t.backward(l);
      return l.value()(0, 0);
    };
    const auto res = toc::testing::gradient_check(store, loss);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-3);
  }
}

TEST_CASE("modality masks silence the masked stream") {
  std::mt19937_64 rng(5);
  toc::nn::ParameterStore store;
  const int d = 6, n = 4;
  auto fp = enc::make_fusion(store, d, 8, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat fv(d, n), fs1(d, n), fs2(d, n), fl(8, n);
  auto fill = [&](Mat& m) { for (int i = 0; i < m.size(); ++i) m.data()[i] = g(rng); };
  fill(fv);
  fill(fs1);
  fill(fs2);
  fill(fl);

  for (auto kind : {enc::FusionKind::Gated, enc::FusionKind::Dot, enc::FusionKind::Add,
                    enc::FusionKind::Concat}) {
    CAPTURE(enc::to_string(kind));
    auto run = [&](enc::ModalityMask m, const Mat& fs) {
      Tape t;
      return enc::fuse(t, fp, kind, m, t.input(fv), t.input(fs), t.input(fl)).value();
    };
    // Text is zeroed out: swapping text inputs cannot change the output.
    CHECK((run(enc::ModalityMask::NoText, fs1) - run(enc::ModalityMask::NoText, fs2))
              .cwiseAbs()
              .maxCoeff() == doctest::Approx(0.0));
    // Full fusion does react to text.
    CHECK((run(enc::ModalityMask::Full, fs1) - run(enc::ModalityMask::Full, fs2))
              .cwiseAbs()
              .maxCoeff() > 1e-9);
    // With every modality off the fused features vanish.
    CHECK(run(enc::ModalityMask::None, fs1).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("fusion kinds and masks round-trip through their names") {
  for (auto k : {enc::FusionKind::Gated, enc::FusionKind::Dot, enc::FusionKind::Add,
                 enc::FusionKind::Concat})
    CHECK(enc::fusion_from_string(enc::to_string(k)) == k);
  for (auto m : {enc::ModalityMask::Full, enc::ModalityMask::NoText,
                 enc::ModalityMask::NoVision, enc::ModalityMask::NoLayout,
                 enc::ModalityMask::None})
    CHECK(enc::mask_from_string(enc::to_string(m)) == m);
  CHECK_THROWS(enc::fusion_from_string("nope"));
  CHECK_THROWS(enc::mask_from_string("nope"));
}

TEST_CASE("pooled page features have the right shape and ignore blank pages") {
  std::mt19937_64 rng(3);
  toc::nn::ParameterStore store;
  enc::VisionConfig cfg;
  cfg.c1 = 2;
  cfg.c2 = 3;
  cfg.c3 = 4;
  cfg.grid = 2;
  auto vp = enc::make_vision(store, cfg, rng);

  auto img = std::make_shared<toc::GrayImage>(toc::GrayImage::blank(40, 32));
  std::mt19937 pix(9);
  for (auto& p : img->pixels) p = static_cast<std::uint8_t>(pix() % 256);

  std::vector<toc::Entity> es(3);
  es[0].box = {2, 2, 20, 8};
  es[0].page = 0;
  es[1].box = {4, 12, 36, 20};
  es[1].page = 0;
  es[2].box = {2, 2, 20, 8};
  es[2].page = 1;
  for (auto& e : es) e.content = "x";
  std::vector<toc::PageMeta> pages{{40.0, 32.0, img}, {40.0, 32.0, nullptr}};
  const auto doc = toc::order_entities(es, pages, "vis");

  const Mat pooled = enc::pooled_features(vp, doc);
  REQUIRE(pooled.rows() == cfg.pooled_dim());
  REQUIRE(pooled.cols() == 3);
  CHECK(pooled.col(0).cwiseAbs().maxCoeff() > 0.0);
  CHECK(pooled.col(1).cwiseAbs().maxCoeff() > 0.0);
  // Page without a raster contributes zero features.
  CHECK(pooled.col(2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  // Identical content and box on a second run stays bit-stable.
  const Mat again = enc::pooled_features(vp, doc);
  CHECK((pooled - again).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("blank rasters pool to zero under zero conv biases") {
  std::mt19937_64 rng(4);
  toc::nn::ParameterStore store;
  enc::VisionConfig cfg;
  cfg.c1 = 2;
  cfg.c2 = 2;
  cfg.c3 = 2;
  cfg.grid = 2;
  auto vp = enc::make_vision(store, cfg, rng);

  auto img = std::make_shared<toc::GrayImage>(toc::GrayImage::blank(24, 24));
  std::vector<toc::Entity> es(1);
  es[0].box = {4, 4, 20, 20};
  es[0].page = 0;
  es[0].content = "x";
  const auto doc = toc::order_entities(es, {{24.0, 24.0, img}}, "blank");
  CHECK(enc::pooled_features(vp, doc).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("trainable backbone gradients flow end to end") {
  std::mt19937_64 rng(23);
  toc::nn::ParameterStore store;
  enc::VisionConfig cfg;
  cfg.c1 = 2;
  cfg.c2 = 2;
  cfg.c3 = 2;
  cfg.grid = 2;
  cfg.train_backbone = true;
  auto vp = enc::make_vision(store, cfg, rng);
  // Zero-initialized biases leave dead map positions exactly at the relu
  // kink, where central differences are ill-defined; nudge them off it.
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (auto* b : {vp.conv1_b, vp.conv2_b, vp.conv3_b, vp.lat_b})
    for (int i = 0; i < b->value.rows(); ++i) b->value(i, 0) = jitter(rng);

  toc::GrayImage img = toc::GrayImage::blank(16, 16);
  std::mt19937 pix(2);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(pix() % 256);
  toc::PageMeta page{16.0, 16.0, nullptr};
  const enc::PreparedRaster raster = enc::prepare_raster(img, page);
  const std::vector<toc::Box> boxes = {{1.0, 1.0, 12.0, 9.0}, {3.0, 6.0, 15.0, 15.0}};

  auto loss = [&]() {
    Tape t;
    Var pooled = enc::vision_forward_page(t, vp, raster, boxes);
    Var l = t.mean_all(t.cmul(pooled, pooled));
    t.backward(l);
    return l.value()(0, 0);
  };
  const auto res = toc::testing::gradient_check(store, loss, 1e-7);
  CAPTURE(res.worst);
  CHECK(res.max_rel_err < 1e-3);
}
