#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>

#include "toc/data/hierdoc.hpp"
#include "toc/data/synth.hpp"
#include "toc/metrics/metrics.hpp"
#include "toc/train/model.hpp"
#include "toc/train/plots.hpp"
#include "toc/train/trainer.hpp"
#include "toc/treeops/treeops.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

json tree_to_json(const toc::ToCNode& n) {
  json j;
  j["text"] = n.text;
  j["children"] = json::array();
  for (const auto& c : n.children) j["children"].push_back(tree_to_json(c));
  return j;
}

void print_tree(std::ostream& os, const toc::ToCNode& n, int depth) {
  os << std::string(static_cast<size_t>(depth) * 2, ' ') << n.text << "\n";
  for (const auto& c : n.children) print_tree(os, c, depth + 1);
}

json report_to_json(const toc::metrics::ScoreReport& r) {
  return {{"documents", r.documents},
          {"teds", r.teds},
          {"pair", {{"precision", r.pair.precision},
                    {"recall", r.pair.recall},
                    {"f1", r.pair.f1}}},
          {"detection", {{"precision", r.detection.precision},
                         {"recall", r.detection.recall},
                         {"f1", r.detection.f1}}}};
}

struct SharedModelOpts {
  std::string fusion = "gated";
  std::string mask = "full";
  std::string decoder = "relations";
  std::uint64_t init_seed = 1;
  bool train_backbone = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--fusion", fusion, "Fusion kind: gated|dot|add|concat")
        ->check(CLI::IsMember({"gated", "dot", "add", "concat"}));
    cmd->add_option("--mask", mask, "Modality mask: full|no_text|no_vision|no_layout|none")
        ->check(CLI::IsMember({"full", "no_text", "no_vision", "no_layout", "none"}));
    cmd->add_option("--decoder", decoder, "Tree decoder: relations|depth")
        ->check(CLI::IsMember({"relations", "depth"}));
    cmd->add_option("--init-seed", init_seed, "Weight initialization seed");
    cmd->add_flag("--train-backbone", train_backbone,
                  "Unfreeze the vision backbone (disables the feature cache)");
  }

  toc::train::ModelConfig build() const {
    toc::train::ModelConfig cfg;
    cfg.fusion = toc::encoder::fusion_from_string(fusion);
    cfg.mask = toc::encoder::mask_from_string(mask);
    cfg.depth_decoder = decoder == "depth";
    cfg.init_seed = init_seed;
    cfg.vision.train_backbone = train_backbone;
    return cfg;
  }
};

int run_synth(const toc::data::SynthConfig& cfg, const std::string& out) {
  const auto ids = toc::data::write_corpus(cfg, out);
  std::cout << "wrote " << ids.size() << " documents to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table-of-contents extraction from paged documents"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI-style key=value file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  toc::data::SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output corpus directory")->required();
  synth->add_option("--docs", sc.docs, "Number of documents");
  synth->add_option("--seed", sc.seed, "Corpus seed");
  synth->add_option("--page-width", sc.page_width, "Page width in pixels");
  synth->add_option("--page-height", sc.page_height, "Page height in pixels");
  synth->add_option("--max-depth", sc.max_depth, "Maximum heading depth");
  synth->add_option("--min-sections", sc.min_sections, "Minimum top-level sections");
  synth->add_option("--max-sections", sc.max_sections, "Maximum top-level sections");
  synth->add_option("--max-children", sc.max_children, "Maximum children per heading");
  synth->add_option("--max-headings", sc.max_headings, "Heading budget per document");
  synth->add_option("--child-prob", sc.child_prob, "Probability a heading nests");
  synth->add_option("--split-prob", sc.split_prob, "Probability a heading wraps lines");
  synth->add_option("--min-body-lines", sc.min_body_lines, "Body lines after a heading");
  synth->add_option("--max-body-lines", sc.max_body_lines, "Body lines after a heading");

  // train
  auto* train = app.add_subcommand("train", "Train a model on a labeled corpus");
  std::string train_data, eval_data, train_out = "run", resume;
  double eval_frac = 0.2;
  int limit = -1;
  SharedModelOpts model_opts;
  toc::train::TrainConfig tc;
  train->add_option("--data", train_data, "Training corpus directory")->required();
  train->add_option("--eval-data", eval_data,
                    "Held-out corpus (default: tail split of --data)");
  train->add_option("--eval-frac", eval_frac, "Tail fraction held out when no --eval-data")
      ->check(CLI::Range(0.0, 0.9));
  train->add_option("--limit", limit, "Use only the first N documents");
  train->add_option("--out", train_out, "Run directory for checkpoints and history");
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_option("--epochs", tc.epochs, "Training epochs");
  train->add_option("--batch-pages", tc.batch_pages, "Page budget per batch");
  train->add_option("--lr", tc.lr_init, "Initial learning rate");
  train->add_option("--lr-min", tc.lr_min, "Final learning rate");
  train->add_option("--shuffle-seed", tc.shuffle_seed, "Epoch shuffle seed");
  train->add_flag("--augment-scale", tc.augment_scale,
                  "Random page re-rasterization in [scale-min, scale-max]");
  train->add_option("--scale-min", tc.scale_min, "Augmentation lower bound");
  train->add_option("--scale-max", tc.scale_max, "Augmentation upper bound");
  train->add_option("--cache", tc.cache_dir, "Feature cache directory");
  train->add_option("--time-budget", tc.time_budget_sec, "Stop after this many seconds");
  bool verbose = false;
  train->add_flag("-v,--verbose", verbose, "Per-epoch progress on stderr");
  model_opts.attach(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a corpus");
  std::string eval_model, eval_corpus, eval_report, eval_hist_dir, eval_cache;
  int eval_limit = -1;
  evaluate->add_option("--model", eval_model, "Checkpoint file")->required();
  evaluate->add_option("--data", eval_corpus, "Corpus directory")->required();
  evaluate->add_option("--report", eval_report, "Write a JSON report here");
  evaluate->add_option("--plots", eval_hist_dir, "Write score histograms here");
  evaluate->add_option("--cache", eval_cache, "Feature cache directory");
  evaluate->add_option("--limit", eval_limit, "Use only the first N documents");

  // predict
  auto* predict = app.add_subcommand("predict", "Extract a table of contents");
  std::string pred_model, pred_doc, pred_out, pred_attention;
  predict->add_option("--model", pred_model, "Checkpoint file")->required();
  predict->add_option("--doc", pred_doc, "Document directory")->required();
  predict->add_option("--out", pred_out, "Write the tree as JSON here");
  predict->add_option("--attention", pred_attention,
                      "Write the decoder attention heatmap PNG here");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Describe a document or checkpoint");
  std::string ins_doc, ins_model;
  inspect->add_option("--doc", ins_doc, "Document directory");
  inspect->add_option("--model", ins_model, "Checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return run_synth(sc, synth_out);

    if (*train) {
      tc.out_dir = train_out;
      tc.quiet = !verbose;
      std::vector<std::string> warnings;
      auto docs = toc::train::load_corpus(train_data, true, &warnings, limit);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      if (docs.empty()) throw toc::DataError("no usable documents in " + train_data);

      std::vector<toc::train::LabeledDoc> eval_docs;
      if (!eval_data.empty()) {
        eval_docs = toc::train::load_corpus(eval_data, true, &warnings);
      } else if (eval_frac > 0) {
        const auto cut = docs.size() - static_cast<size_t>(docs.size() * eval_frac);
        eval_docs.assign(std::make_move_iterator(docs.begin() + cut),
                         std::make_move_iterator(docs.end()));
        docs.resize(cut);
        if (docs.empty()) throw toc::DataError("eval split consumed every document");
      }

      toc::train::Model model = resume.empty()
                                    ? toc::train::make_model(model_opts.build())
                                    : toc::train::load_checkpoint(resume);
      const auto result = toc::train::fit(model, docs, eval_docs, tc);
      std::cout << "epochs " << result.epochs_run;
      if (result.best_teds >= 0)
        std::cout << "  best teds " << std::fixed << std::setprecision(4)
                  << result.best_teds;
      std::cout << "\n";
      if (result.diverged) {
        std::cerr << "training diverged (non-finite loss)\n";
        return kExitDiverged;
      }
      return kExitOk;
    }

    if (*evaluate) {
      const auto model = toc::train::load_checkpoint(eval_model);
      const auto docs = toc::train::load_corpus(eval_corpus, true, nullptr, eval_limit);
      if (docs.empty()) throw toc::DataError("no usable documents in " + eval_corpus);
      std::vector<toc::metrics::ScoreReport> per_doc;
      const auto report = toc::train::evaluate(model, docs, eval_cache, &per_doc);
      std::cout << std::fixed << std::setprecision(4) << "documents  "
                << report.documents << "\nteds       " << report.teds
                << "\npair_f1    " << report.pair.f1 << "  (p " << report.pair.precision
                << ", r " << report.pair.recall << ")\ndetection  " << report.detection.f1
                << "  (p " << report.detection.precision << ", r "
                << report.detection.recall << ")\n";
      if (!eval_report.empty()) {
        json j = report_to_json(report);
        j["per_document"] = json::array();
        for (const auto& r : per_doc) j["per_document"].push_back(report_to_json(r));
        std::ofstream os(eval_report);
        os << j.dump(2) << "\n";
      }
      if (!eval_hist_dir.empty()) {
        fs::create_directories(eval_hist_dir);
        std::vector<double> teds_values, pair_values;
        for (const auto& r : per_doc) {
          teds_values.push_back(r.teds);
          pair_values.push_back(r.pair.f1);
        }
        toc::train::plot_histogram(teds_values, 20, 0.0, 1.0,
                                   (fs::path(eval_hist_dir) / "teds.png").string());
        toc::train::plot_histogram(pair_values, 20, 0.0, 1.0,
                                   (fs::path(eval_hist_dir) / "pair_f1.png").string());
      }
      return kExitOk;
    }

    if (*predict) {
      const auto model = toc::train::load_checkpoint(pred_model);
      const auto loaded = toc::data::load_document(pred_doc);
      const auto features = toc::train::features_for(model, loaded.doc, "");
      const auto pred = toc::train::predict(model, loaded.doc, features);
      for (const auto& w : pred.warnings) std::cerr << "warning: " << w << "\n";
      print_tree(std::cout, pred.tree.root, 0);
      if (!pred_out.empty()) {
        json j;
        j["format_version"] = 1;
        j["tree"] = tree_to_json(pred.tree.root);
        std::ofstream os(pred_out);
        os << j.dump(2) << "\n";
      }
      if (!pred_attention.empty()) {
        if (pred.attention.empty())
          std::cerr << "warning: no attention to plot\n";
        else
          toc::train::plot_attention(pred.attention, pred_attention);
      }
      return kExitOk;
    }

    if (*inspect) {
      if (ins_doc.empty() && ins_model.empty())
        throw CLI::ValidationError("inspect", "pass --doc and/or --model");
      if (!ins_doc.empty()) {
        const auto loaded = toc::data::load_document(ins_doc);
        int headings = 0, with_raster = 0;
        for (const auto& e : loaded.doc.entities) headings += e.heading ? 1 : 0;
        for (const auto& p : loaded.doc.pages) with_raster += p.raster ? 1 : 0;
        std::cout << "doc_id    " << loaded.doc.doc_id << "\npages     "
                  << loaded.doc.pages.size() << " (" << with_raster << " rasterized)"
                  << "\nentities  " << loaded.doc.entities.size() << "\nheadings  "
                  << headings << "\n";
        if (loaded.tree) {
          std::cout << "gold tree (" << toc::node_count(*loaded.tree) - 1 << " nodes, depth "
                    << toc::treeops::tree_depth(*loaded.tree) << "):\n";
          for (const auto& c : loaded.tree->root.children) print_tree(std::cout, c, 1);
        } else {
          std::cout << "gold tree absent\n";
        }
      }
      if (!ins_model.empty()) {
        const auto model = toc::train::load_checkpoint(ins_model);
        std::cout << "config:\n" << toc::train::config_to_json(model.cfg) << "\n";
        size_t total = 0, trainable = 0;
        for (const auto& p : model.store.all()) {
          total += static_cast<size_t>(p.value.size());
          if (p.trainable) trainable += static_cast<size_t>(p.value.size());
        }
        std::cout << "parameters " << model.store.count() << " tensors, " << total
                  << " values (" << trainable << " trainable)\n";
      }
      return kExitOk;
    }
  } catch (const toc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
