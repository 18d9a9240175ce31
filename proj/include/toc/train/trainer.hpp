#ifndef TOC_TRAIN_TRAINER_HPP
#define TOC_TRAIN_TRAINER_HPP

#include <string>
#include <vector>

#include "toc/metrics/metrics.hpp"
#include "toc/train/model.hpp"

namespace toc::train {

struct LabeledDoc {
  toc::Document doc;  // entities carry heading flags and dotted ids
  toc::ToCTree tree;
};

// Loads every document under root. Documents whose entities lack heading
// labels but ship a gold tree get labels by text alignment. Documents
// without any usable labels are skipped with a warning.
std::vector<LabeledDoc> load_corpus(const std::string& root, bool lenient = true,
                                    std::vector<std::string>* warnings = nullptr,
                                    int limit = -1);

// Cache-aware feature computation. The cache is bypassed while the backbone
// trains, since pooled vision features would go stale every step.
toc::data::FeatureBundle features_for(const Model& m, const toc::Document& doc,
                                      const std::string& cache_dir);

struct TrainConfig {
  int epochs = 20;
  int batch_pages = 12;  // greedy page budget per batch, always >= 1 doc
  double lr_init = 5e-4;
  double lr_min = 1e-6;
  std::uint64_t shuffle_seed = 7;
  bool augment_scale = false;  // random page re-rasterization, vision only
  double scale_min = 0.8;
  double scale_max = 1.2;
  std::string cache_dir;  // empty disables the feature cache
  std::string out_dir;    // best.ckpt, last.ckpt, history.jsonl
  double time_budget_sec = 0;  // stop after the epoch that crosses it; 0 = off
  bool quiet = true;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double lr = 0;
  double teds = -1;     // -1 when no eval split
  double pair_f1 = -1;
  double seconds = 0;
};

struct TrainResult {
  bool diverged = false;
  int epochs_run = 0;
  double best_teds = -1;
  std::string best_path;
  std::vector<EpochStats> history;
};

// Adam with cosine-annealed learning rate over all scheduled batches.
// A non-finite batch loss stops training immediately with diverged set; the
// checkpoints written so far stay on disk.
TrainResult fit(Model& m, const std::vector<LabeledDoc>& train_docs,
                const std::vector<LabeledDoc>& eval_docs, const TrainConfig& cfg);

// Macro-averaged scores over the corpus; per_doc, when given, receives one
// report per document in corpus order.
toc::metrics::ScoreReport evaluate(const Model& m, const std::vector<LabeledDoc>& docs,
                                   const std::string& cache_dir = "",
                                   std::vector<toc::metrics::ScoreReport>* per_doc = nullptr);

}  // namespace toc::train

#endif
