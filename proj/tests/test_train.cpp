#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "toc/data/hierdoc.hpp"
#include "toc/data/synth.hpp"
#include "toc/metrics/metrics.hpp"
#include "toc/train/model.hpp"
#include "toc/train/trainer.hpp"
#include "toc/treeops/treeops.hpp"

namespace tr = toc::train;
namespace fs = std::filesystem;

namespace {

toc::data::SynthConfig tiny_corpus_config() {
  toc::data::SynthConfig cfg;
  cfg.seed = 21;
  cfg.page_width = 150;
  cfg.page_height = 200;
  cfg.max_depth = 2;
  cfg.min_sections = 2;
  cfg.max_sections = 2;
  cfg.max_children = 2;
  cfg.max_headings = 6;
  cfg.min_body_lines = 1;
  cfg.max_body_lines = 1;
  return cfg;
}

tr::ModelConfig tiny_model_config() {
  tr::ModelConfig cfg;
  cfg.dim = 8;
  cfg.text_dim = 16;
  cfg.vision.c1 = 2;
  cfg.vision.c2 = 3;
  cfg.vision.c3 = 4;
  cfg.vision.grid = 2;
  cfg.classifier_hidden = 8;
  cfg.decoder.hidden = 8;
  cfg.decoder.attn = 8;
  cfg.decoder.cov_channels = 4;
  cfg.decoder.cov_kernel = 3;
  cfg.decoder.tf_layers = 1;
  cfg.decoder.tf_heads = 2;
  cfg.decoder.tf_ffn = 16;
  cfg.decoder.relation_hidden = 8;
  return cfg;
}

double loss_value(const tr::Model& m, const toc::Document& doc,
                  const toc::data::FeatureBundle& f, const tr::DocLabels& labels) {
  toc::nn::Tape t;
  return tr::document_loss(t, m, doc, f, labels).value()(0, 0);
}

std::vector<tr::LabeledDoc> synth_docs(const toc::data::SynthConfig& cfg, int n) {
  std::vector<tr::LabeledDoc> docs;
  for (int i = 0; i < n; ++i) {
    auto sd = toc::data::make_document(cfg, i);
    docs.push_back({std::move(sd.doc), std::move(sd.tree)});
  }
  return docs;
}

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("toc_train_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("document loss is finite for every fusion kind and mask") {
  const auto sd = toc::data::make_document(tiny_corpus_config(), 0);
  auto cfg = tiny_model_config();
  for (auto kind : {toc::encoder::FusionKind::Gated, toc::encoder::FusionKind::Dot,
                    toc::encoder::FusionKind::Add, toc::encoder::FusionKind::Concat}) {
    for (auto mask : {toc::encoder::ModalityMask::Full, toc::encoder::ModalityMask::NoText,
                      toc::encoder::ModalityMask::NoVision,
                      toc::encoder::ModalityMask::NoLayout,
                      toc::encoder::ModalityMask::None}) {
      cfg.fusion = kind;
      cfg.mask = mask;
      auto m = tr::make_model(cfg);
      const auto f = tr::compute_features(m, sd.doc);
      const auto labels = tr::labels_from_document(sd.doc, m.cfg.depth_classes);
      const double v = loss_value(m, sd.doc, f, labels);
      CAPTURE(toc::encoder::to_string(kind));
      CAPTURE(toc::encoder::to_string(mask));
      CHECK(std::isfinite(v));
      CHECK(v > 0);
    }
  }
}

TEST_CASE("joint loss gradients match finite differences on sampled weights") {
  const auto sd = toc::data::make_document(tiny_corpus_config(), 1);
  auto cfg = tiny_model_config();
  cfg.vision.train_backbone = true;  // exercise the live backbone path too
  auto m = tr::make_model(cfg);

  std::mt19937_64 jitter(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (auto* p : {m.vision.conv1_b, m.vision.conv2_b, m.vision.conv3_b, m.vision.lat_b})
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value(i) += noise(jitter);

  const auto f = tr::compute_features(m, sd.doc);
  const auto labels = tr::labels_from_document(sd.doc, m.cfg.depth_classes);

  toc::nn::Tape t;
  auto loss = tr::document_loss(t, m, sd.doc, f, labels);
  m.store.zero_grad();
  t.backward(loss);

  std::mt19937_64 rng(7);
  const double h = 1e-5;
  int checked = 0;
  for (auto& p : m.store.all()) {
    if (!p.trainable || p.value.size() == 0) continue;
    for (int s = 0; s < 2; ++s) {
      const auto i =
          std::uniform_int_distribution<Eigen::Index>(0, p.value.size() - 1)(rng);
      const double keep = p.value(i);
      p.value(i) = keep + h;
      const double fp = loss_value(m, sd.doc, f, labels);
      p.value(i) = keep - h;
      const double fm = loss_value(m, sd.doc, f, labels);
      p.value(i) = keep;
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = p.grad(i);
      if (std::abs(numeric) < 1e-7 && std::abs(analytic) < 1e-7) continue;
      const double rel =
          std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
      CAPTURE(p.name);
      CAPTURE(i);
      CHECK(rel < 2e-3);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("documents without headings fall back to the classification loss") {
  std::vector<toc::PageMeta> pages(1);
  pages[0].width = 100;
  pages[0].height = 100;
  std::vector<toc::Entity> ents(3);
  for (int i = 0; i < 3; ++i) {
    ents[static_cast<size_t>(i)].content = "body line";
    ents[static_cast<size_t>(i)].box = {10, 10.0 + 20 * i, 90, 18.0 + 20 * i};
  }
  const auto doc = toc::order_entities(std::move(ents), std::move(pages), "d");
  auto m = tr::make_model(tiny_model_config());
  const auto f = tr::compute_features(m, doc);
  const auto labels = tr::labels_from_document(doc, m.cfg.depth_classes);
  CHECK(labels.heading_orders.empty());
  CHECK(std::isfinite(loss_value(m, doc, f, labels)));
}

TEST_CASE("training is deterministic for fixed seeds") {
  const auto docs = synth_docs(tiny_corpus_config(), 3);
  tr::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_pages = 2;

  auto run = [&]() {
    auto m = tr::make_model(tiny_model_config());
    const auto result = tr::fit(m, docs, {}, tc);
    std::vector<double> losses;
    for (const auto& s : result.history) losses.push_back(s.loss);
    const auto f = tr::compute_features(m, docs[0].doc);
    const auto pred = tr::predict(m, docs[0].doc, f);
    return std::make_pair(losses, pred.tree);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.size() == b.first.size());
  for (size_t i = 0; i < a.first.size(); ++i) CHECK(a.first[i] == b.first[i]);
  CHECK(toc::trees_equal(a.second, b.second));
}

TEST_CASE("the model overfits a two-document corpus") {
  const auto docs = synth_docs(tiny_corpus_config(), 2);
  auto m = tr::make_model(tr::ModelConfig{});
  tr::TrainConfig tc;
  tc.epochs = 40;
  tc.batch_pages = 12;
  const auto result = tr::fit(m, docs, {}, tc);
  REQUIRE(!result.diverged);
  CHECK(result.history.back().loss < 0.05);

  double teds_sum = 0;
  for (const auto& ld : docs) {
    const auto f = tr::compute_features(m, ld.doc);
    const auto pred = tr::predict(m, ld.doc, f);
    teds_sum += toc::metrics::teds(pred.tree, ld.tree);
  }
  CHECK(teds_sum / 2 >= 0.95);
}

TEST_CASE("checkpoints round trip bit-identical predictions") {
  auto dir = temp_dir("ckpt");
  const auto docs = synth_docs(tiny_corpus_config(), 2);
  auto m = tr::make_model(tiny_model_config());
  tr::TrainConfig tc;
  tc.epochs = 1;
  const auto result = tr::fit(m, docs, {}, tc);
  REQUIRE(!result.diverged);

  const auto path = (dir / "model.ckpt").string();
  tr::save_checkpoint(path, m);
  const auto loaded = tr::load_checkpoint(path);
  CHECK(tr::config_to_json(loaded.cfg) == tr::config_to_json(m.cfg));
  REQUIRE(loaded.store.count() == m.store.count());
  for (const auto& p : m.store.all()) {
    const auto* q = loaded.store.find(p.name);
    REQUIRE(q != nullptr);
    CHECK(q->value == p.value);
  }

  const auto f = tr::compute_features(m, docs[0].doc);
  const auto a = tr::predict(m, docs[0].doc, f);
  const auto b = tr::predict(loaded, docs[0].doc, f);
  CHECK(toc::trees_equal(a.tree, b.tree));
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i] == b.steps[i]);

  SUBCASE("corrupt files are rejected") {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "TOCCKPT1 but then garbage";
    os.close();
    CHECK_THROWS_AS(tr::load_checkpoint(path), toc::DataError);
  }
}

TEST_CASE("a non-finite loss stops training with the diverged flag") {
  const auto docs = synth_docs(tiny_corpus_config(), 2);
  auto m = tr::make_model(tiny_model_config());
  m.store.find("cls.proj.W")->value(0, 0) = std::nan("");
  tr::TrainConfig tc;
  tc.epochs = 2;
  const auto result = tr::fit(m, docs, {}, tc);
  CHECK(result.diverged);
  CHECK(result.history.empty());
}

TEST_CASE("depth decoder trains and predicts bounded trees") {
  const auto docs = synth_docs(tiny_corpus_config(), 3);
  auto cfg = tiny_model_config();
  cfg.depth_decoder = true;
  auto m = tr::make_model(cfg);
  tr::TrainConfig tc;
  tc.epochs = 2;
  const auto result = tr::fit(m, docs, docs, tc);
  REQUIRE(!result.diverged);
  CHECK(result.history.back().teds >= 0);

  const auto f = tr::compute_features(m, docs[0].doc);
  const auto pred = tr::predict(m, docs[0].doc, f);
  CHECK(pred.steps.empty());
  CHECK(toc::treeops::tree_depth(pred.tree) <= m.cfg.depth_classes);
}

TEST_CASE("feature cache serves recomputation-identical bundles") {
  auto dir = temp_dir("cache");
  const auto sd = toc::data::make_document(tiny_corpus_config(), 0);
  const auto m = tr::make_model(tiny_model_config());
  const auto fresh = tr::features_for(m, sd.doc, dir.string());
  REQUIRE(fs::exists(dir / toc::data::cache_filename(sd.doc.doc_id,
                                                     tr::features_fingerprint(m))));
  const auto cached = tr::features_for(m, sd.doc, dir.string());
  CHECK(cached.layout == fresh.layout);
  CHECK(cached.text == fresh.text);
  CHECK(cached.vision == fresh.vision);

  // A different init seed changes the backbone weights and the fingerprint,
  // so the stale file misses instead of serving wrong features.
  auto cfg2 = tiny_model_config();
  cfg2.init_seed = 99;
  const auto m2 = tr::make_model(cfg2);
  CHECK(tr::features_fingerprint(m2) != tr::features_fingerprint(m));
  const auto f2 = tr::features_for(m2, sd.doc, dir.string());
  CHECK(f2.vision != fresh.vision);
}

TEST_CASE("scale augmentation trains without touching the cache") {
  auto dir = temp_dir("aug");
  const auto docs = synth_docs(tiny_corpus_config(), 2);
  auto m = tr::make_model(tiny_model_config());
  tr::TrainConfig tc;
  tc.epochs = 1;
  tc.augment_scale = true;
  tc.cache_dir = (dir / "cache").string();
  const auto result = tr::fit(m, docs, {}, tc);
  REQUIRE(!result.diverged);
  CHECK(std::isfinite(result.history.back().loss));
  CHECK(!fs::exists(dir / "cache"));
}

TEST_CASE("load_corpus aligns tree-only gold labels") {
  auto dir = temp_dir("corpus");
  toc::data::SynthConfig cfg = tiny_corpus_config();
  cfg.split_prob = 0;
  auto sd = toc::data::make_document(cfg, 2);

  // Strip the entity labels, keep the tree: the loader must recover the
  // heading flags and ids by alignment.
  toc::Document stripped = sd.doc;
  for (auto& e : stripped.entities) {
    e.heading = false;
    e.id.reset();
  }
  toc::data::save_document((dir / "doc-a").string(), stripped, &sd.tree);
  std::vector<std::string> warnings;
  const auto docs = tr::load_corpus(dir.string(), true, &warnings);
  REQUIRE(docs.size() == 1);
  CHECK(warnings.empty());
  const auto labels = tr::labels_from_document(docs[0].doc, 5);
  CHECK(labels.heading_orders.size() ==
        toc::heading_indices(sd.doc).size());
  CHECK(toc::trees_equal(docs[0].tree, sd.tree));
}
