#include "toc/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <random>

#include "toc/data/hierdoc.hpp"
#include "toc/data/raster.hpp"
#include "toc/treeops/treeops.hpp"

namespace toc::train {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<LabeledDoc> load_corpus(const std::string& root, bool lenient,
                                    std::vector<std::string>* warnings, int limit) {
  std::vector<LabeledDoc> out;
  for (const auto& id : toc::data::list_documents(root)) {
    if (limit >= 0 && static_cast<int>(out.size()) >= limit) break;
    auto loaded = toc::data::load_document(root + "/" + id);
    const bool labeled =
        std::any_of(loaded.doc.entities.begin(), loaded.doc.entities.end(),
                    [](const toc::Entity& e) { return e.heading; });
    if (!labeled) {
      if (!loaded.tree) {
        if (warnings) warnings->push_back(id + ": no labels and no gold tree, skipped");
        continue;
      }
      auto aligned = toc::data::align_tree(loaded.doc, *loaded.tree, 0.2, lenient);
      if (warnings)
        for (auto& w : aligned.warnings) warnings->push_back(id + ": " + w);
      loaded.doc = std::move(aligned.doc);
    }
    LabeledDoc ld;
    ld.doc = std::move(loaded.doc);
    if (loaded.tree) {
      ld.tree = std::move(*loaded.tree);
    } else {
      const auto steps = toc::treeops::steps_from_ids(ld.doc);
      std::vector<std::string> texts;
      std::vector<int> orders;
      for (int i : toc::heading_indices(ld.doc)) {
        texts.push_back(ld.doc.entities[i].content);
        orders.push_back(i);
      }
      ld.tree = toc::treeops::tree_from_steps(steps, texts, orders);
    }
    out.push_back(std::move(ld));
  }
  return out;
}

toc::data::FeatureBundle features_for(const Model& m, const toc::Document& doc,
                                      const std::string& cache_dir) {
  if (cache_dir.empty() || m.cfg.vision.train_backbone) return compute_features(m, doc);
  const std::string fp = features_fingerprint(m);
  const auto path =
      (fs::path(cache_dir) / toc::data::cache_filename(doc.doc_id, fp)).string();
  if (auto cached = toc::data::load_features(path, fp)) return std::move(*cached);
  auto f = compute_features(m, doc);
  fs::create_directories(cache_dir);
  toc::data::save_features(path, fp, f);
  return f;
}

namespace {

// Re-rasterizes every page at the given scale; box coordinates stay in page
// units, so only the vision input changes.
toc::Document scaled_copy(const toc::Document& doc, double scale) {
  toc::Document copy = doc;
  for (auto& page : copy.pages) {
    if (!page.raster) continue;
    const int w = std::max(8, static_cast<int>(std::lround(page.raster->width * scale)));
    const int h = std::max(8, static_cast<int>(std::lround(page.raster->height * scale)));
    page.raster = std::make_shared<toc::GrayImage>(
        toc::data::resample_nearest(*page.raster, w, h));
  }
  return copy;
}

std::vector<std::vector<int>> pack_batches(std::vector<int> order,
                                           const std::vector<LabeledDoc>& docs,
                                           int batch_pages) {
  std::vector<std::vector<int>> batches;
  std::vector<int> cur;
  int pages = 0;
  for (int idx : order) {
    const int p = static_cast<int>(docs[static_cast<size_t>(idx)].doc.pages.size());
    if (!cur.empty() && pages + p > batch_pages) {
      batches.push_back(std::move(cur));
      cur.clear();
      pages = 0;
    }
    cur.push_back(idx);
    pages += p;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace

toc::metrics::ScoreReport evaluate(const Model& m, const std::vector<LabeledDoc>& docs,
                                   const std::string& cache_dir,
                                   std::vector<toc::metrics::ScoreReport>* per_doc) {
  toc::metrics::ScoreReport total;
  if (per_doc) per_doc->clear();
  for (const auto& ld : docs) {
    const auto f = features_for(m, ld.doc, cache_dir);
    const auto pred = predict(m, ld.doc, f);

    toc::metrics::ScoreReport r;
    r.documents = 1;
    r.teds = toc::metrics::teds(pred.tree, ld.tree);

    const auto gold_labels = labels_from_document(ld.doc, m.cfg.depth_classes);
    const auto gold_pairs =
        toc::metrics::steps_to_pairs(gold_labels.steps, gold_labels.heading_orders);
    std::vector<toc::metrics::PairTuple> pred_pairs;
    if (!pred.steps.empty())
      pred_pairs = toc::metrics::steps_to_pairs(pred.steps, pred.heading_orders);
    r.pair = toc::metrics::pair_f1(pred_pairs, gold_pairs);
    r.detection = toc::metrics::detection_prf(pred.heading_flags, gold_labels.headings);

    total.teds += r.teds;
    total.pair.precision += r.pair.precision;
    total.pair.recall += r.pair.recall;
    total.pair.f1 += r.pair.f1;
    total.detection.precision += r.detection.precision;
    total.detection.recall += r.detection.recall;
    total.detection.f1 += r.detection.f1;
    ++total.documents;
    if (per_doc) per_doc->push_back(r);
  }
  if (total.documents > 0) {
    const double n = total.documents;
    total.teds /= n;
    total.pair.precision /= n;
    total.pair.recall /= n;
    total.pair.f1 /= n;
    total.detection.precision /= n;
    total.detection.recall /= n;
    total.detection.f1 /= n;
  }
  return total;
}

TrainResult fit(Model& m, const std::vector<LabeledDoc>& train_docs,
                const std::vector<LabeledDoc>& eval_docs, const TrainConfig& cfg) {
  TrainResult result;
  if (train_docs.empty()) throw DataError("fit: empty training corpus");
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  std::vector<DocLabels> labels;
  labels.reserve(train_docs.size());
  for (const auto& ld : train_docs)
    labels.push_back(labels_from_document(ld.doc, m.cfg.depth_classes));

  // The shuffles are deterministic, so the whole batch schedule is known up
  // front; cosine annealing runs over the exact batch count.
  std::vector<std::vector<std::vector<int>>> schedule;
  int total_batches = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::vector<int> order(train_docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.shuffle_seed + 0x9e3779b97f4a7c15ULL * (e + 1));
    std::shuffle(order.begin(), order.end(), rng);
    schedule.push_back(pack_batches(std::move(order), train_docs, cfg.batch_pages));
    total_batches += static_cast<int>(schedule.back().size());
  }

  toc::nn::Adam adam;
  std::ofstream history;
  if (!cfg.out_dir.empty())
    history.open(fs::path(cfg.out_dir) / "history.jsonl", std::ios::trunc);

  const auto t0 = std::chrono::steady_clock::now();
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto e0 = std::chrono::steady_clock::now();
    std::mt19937_64 aug_rng(cfg.shuffle_seed ^ (0xa5a5a5a5ULL + epoch));
    double epoch_loss = 0;
    int epoch_docs = 0;
    double lr = cfg.lr_init;

    for (const auto& batch : schedule[static_cast<size_t>(epoch)]) {
      lr = toc::nn::cosine_lr(step, total_batches, cfg.lr_init, cfg.lr_min);
      toc::nn::Tape tape;
      std::vector<toc::nn::Var> losses;
      for (int idx : batch) {
        const auto& ld = train_docs[static_cast<size_t>(idx)];
        if (cfg.augment_scale) {
          const double s = std::uniform_real_distribution<double>(
              cfg.scale_min, cfg.scale_max)(aug_rng);
          const auto scaled = scaled_copy(ld.doc, s);
          const auto f = compute_features(m, scaled);
          losses.push_back(
              document_loss(tape, m, scaled, f, labels[static_cast<size_t>(idx)]));
        } else {
          const auto f = features_for(m, ld.doc, cfg.cache_dir);
          losses.push_back(
              document_loss(tape, m, ld.doc, f, labels[static_cast<size_t>(idx)]));
        }
      }
      toc::nn::Var batch_loss = tape.mean_all(tape.hcat(losses));
      const double value = batch_loss.value()(0, 0);
      if (!std::isfinite(value)) {
        result.diverged = true;
        if (!cfg.quiet)
          std::cerr << "diverged at epoch " << epoch << " step " << step << "\n";
        return result;
      }
      epoch_loss += value * static_cast<double>(batch.size());
      epoch_docs += static_cast<int>(batch.size());
      m.store.zero_grad();
      tape.backward(batch_loss);
      adam.step(m.store, lr);
      ++step;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / std::max(1, epoch_docs);
    stats.lr = lr;
    if (!eval_docs.empty()) {
      const auto report = evaluate(m, eval_docs, cfg.cache_dir);
      stats.teds = report.teds;
      stats.pair_f1 = report.pair.f1;
      if (!cfg.out_dir.empty() && report.teds > result.best_teds) {
        result.best_path = (fs::path(cfg.out_dir) / "best.ckpt").string();
        save_checkpoint(result.best_path, m);
      }
      result.best_teds = std::max(result.best_teds, report.teds);
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
    result.history.push_back(stats);
    result.epochs_run = epoch + 1;

    if (!cfg.out_dir.empty()) {
      save_checkpoint((fs::path(cfg.out_dir) / "last.ckpt").string(), m);
      if (history) {
        json line = {{"epoch", stats.epoch},   {"loss", stats.loss},
                     {"lr", stats.lr},         {"teds", stats.teds},
                     {"pair_f1", stats.pair_f1}, {"seconds", stats.seconds}};
        history << line.dump() << "\n";
        history.flush();
      }
    }
    if (!cfg.quiet)
      std::cerr << "epoch " << epoch << " loss " << stats.loss << " lr " << stats.lr
                << " teds " << stats.teds << "\n";

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.time_budget_sec > 0 && elapsed > cfg.time_budget_sec) break;
  }
  return result;
}

}  // namespace toc::train
