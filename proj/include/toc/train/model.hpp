#ifndef TOC_TRAIN_MODEL_HPP
#define TOC_TRAIN_MODEL_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toc/classifier/classifier.hpp"
#include "toc/core/types.hpp"
#include "toc/data/feature_cache.hpp"
#include "toc/decoder/decoder.hpp"
#include "toc/encoder/fusion.hpp"
#include "toc/encoder/text.hpp"
#include "toc/encoder/vision.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::train {

struct ModelConfig {
  int dim = 128;
  int text_dim = 256;
  std::uint64_t text_seed = 0x746f63;
  std::uint64_t init_seed = 1;
  toc::encoder::VisionConfig vision;
  toc::encoder::FusionKind fusion = toc::encoder::FusionKind::Gated;
  toc::encoder::ModalityMask mask = toc::encoder::ModalityMask::Full;
  int classifier_hidden = 128;
  toc::decoder::DecoderConfig decoder;  // decoder.dim is forced to dim
  bool depth_decoder = false;           // per-heading depth head instead of relations
  int depth_classes = 5;
  double gamma = 2.0;
  double alpha = 0.25;
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

// The full pipeline: per-entity encoders, gated fusion, BiGRU heading
// classifier, and the attention tree decoder, all over one parameter store.
struct Model {
  ModelConfig cfg;
  toc::nn::ParameterStore store;
  std::unique_ptr<toc::encoder::TextEmbedder> embedder;
  toc::encoder::VisionParams vision;
  toc::nn::LinearParams vis_proj;  // pooled -> dim
  toc::nn::LinearParams txt_proj;  // text_dim -> dim
  toc::encoder::FusionParams fusion;
  toc::classifier::ClassifierParams classifier;
  toc::decoder::DecoderParams decoder;
};

Model make_model(const ModelConfig& cfg);

// Raw (unprojected) per-entity features; cacheable while the backbone stays
// frozen. The fingerprint keys cache files to the embedder and the backbone.
toc::data::FeatureBundle compute_features(const Model& m, const toc::Document& doc);
std::string features_fingerprint(const Model& m);

// Gold supervision pulled out of a labeled document (heading flags + ids).
struct DocLabels {
  std::vector<bool> headings;            // one flag per entity
  std::vector<int> heading_orders;       // doc_order of heading k at [k-1]
  std::vector<toc::RelationStep> steps;  // relation target per heading
  std::vector<int> depths;               // depth target per heading, clamped
};

DocLabels labels_from_document(const toc::Document& doc, int depth_classes);

// Joint training objective for one document with teacher forcing on the gold
// headings: classification + reference + relation focal losses, all weighted
// equally (depth head replaces the last two when configured).
toc::nn::Var document_loss(toc::nn::Tape& t, const Model& m, const toc::Document& doc,
                           const toc::data::FeatureBundle& f, const DocLabels& labels);

struct Prediction {
  toc::ToCTree tree;
  std::vector<bool> heading_flags;      // per entity
  std::vector<int> heading_orders;      // doc_order of predicted headings
  std::vector<toc::RelationStep> steps; // empty for the depth decoder
  std::vector<Eigen::VectorXd> attention;
  int coerced_steps = 0;
  std::vector<std::string> warnings;
};

Prediction predict(const Model& m, const toc::Document& doc,
                   const toc::data::FeatureBundle& f);

void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

}  // namespace toc::train

#endif
