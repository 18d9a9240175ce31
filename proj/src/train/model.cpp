#include "toc/train/model.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <random>

#include "toc/encoder/layout.hpp"
#include "toc/nn/loss.hpp"
#include "toc/treeops/treeops.hpp"

namespace toc::train {

using json = nlohmann::json;
using toc::nn::Tape;
using toc::nn::Var;

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["dim"] = cfg.dim;
  j["text_dim"] = cfg.text_dim;
  j["text_seed"] = cfg.text_seed;
  j["init_seed"] = cfg.init_seed;
  j["vision"] = {{"c1", cfg.vision.c1},
                 {"c2", cfg.vision.c2},
                 {"c3", cfg.vision.c3},
                 {"grid", cfg.vision.grid},
                 {"train_backbone", cfg.vision.train_backbone}};
  j["fusion"] = toc::encoder::to_string(cfg.fusion);
  j["mask"] = toc::encoder::to_string(cfg.mask);
  j["classifier_hidden"] = cfg.classifier_hidden;
  j["decoder"] = {{"hidden", cfg.decoder.hidden},
                  {"attn", cfg.decoder.attn},
                  {"cov_channels", cfg.decoder.cov_channels},
                  {"cov_kernel", cfg.decoder.cov_kernel},
                  {"tf_layers", cfg.decoder.tf_layers},
                  {"tf_heads", cfg.decoder.tf_heads},
                  {"tf_ffn", cfg.decoder.tf_ffn},
                  {"positional", cfg.decoder.positional},
                  {"relation_hidden", cfg.decoder.relation_hidden}};
  j["depth_decoder"] = cfg.depth_decoder;
  j["depth_classes"] = cfg.depth_classes;
  j["gamma"] = cfg.gamma;
  j["alpha"] = cfg.alpha;
  return j.dump(2);
}

ModelConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  cfg.dim = j.at("dim").get<int>();
  cfg.text_dim = j.at("text_dim").get<int>();
  cfg.text_seed = j.at("text_seed").get<std::uint64_t>();
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  const auto& v = j.at("vision");
  cfg.vision.c1 = v.at("c1").get<int>();
  cfg.vision.c2 = v.at("c2").get<int>();
  cfg.vision.c3 = v.at("c3").get<int>();
  cfg.vision.grid = v.at("grid").get<int>();
  cfg.vision.train_backbone = v.at("train_backbone").get<bool>();
  cfg.fusion = toc::encoder::fusion_from_string(j.at("fusion").get<std::string>());
  cfg.mask = toc::encoder::mask_from_string(j.at("mask").get<std::string>());
  cfg.classifier_hidden = j.at("classifier_hidden").get<int>();
  const auto& d = j.at("decoder");
  cfg.decoder.hidden = d.at("hidden").get<int>();
  cfg.decoder.attn = d.at("attn").get<int>();
  cfg.decoder.cov_channels = d.at("cov_channels").get<int>();
  cfg.decoder.cov_kernel = d.at("cov_kernel").get<int>();
  cfg.decoder.tf_layers = d.at("tf_layers").get<int>();
  cfg.decoder.tf_heads = d.at("tf_heads").get<int>();
  cfg.decoder.tf_ffn = d.at("tf_ffn").get<int>();
  cfg.decoder.positional = d.at("positional").get<bool>();
  cfg.decoder.relation_hidden = d.at("relation_hidden").get<int>();
  cfg.depth_decoder = j.at("depth_decoder").get<bool>();
  cfg.depth_classes = j.at("depth_classes").get<int>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  return cfg;
}

Model make_model(const ModelConfig& cfg_in) {
  Model m;
  m.cfg = cfg_in;
  m.cfg.decoder.dim = m.cfg.dim;
  std::mt19937_64 rng(m.cfg.init_seed);

  m.embedder = std::make_unique<toc::encoder::HashBagEmbedder>(m.cfg.text_dim,
                                                               m.cfg.text_seed);
  m.vision = toc::encoder::make_vision(m.store, m.cfg.vision, rng);
  m.vis_proj = toc::nn::make_linear(m.store, "enc.vis_proj", m.cfg.vision.pooled_dim(),
                                    m.cfg.dim, rng);
  m.txt_proj =
      toc::nn::make_linear(m.store, "enc.txt_proj", m.cfg.text_dim, m.cfg.dim, rng);
  m.fusion = toc::encoder::make_fusion(m.store, m.cfg.dim, 8, rng);
  m.classifier =
      toc::classifier::make_classifier(m.store, m.cfg.dim, m.cfg.classifier_hidden, rng);
  m.decoder = toc::decoder::make_decoder(m.store, m.cfg.decoder, rng, m.cfg.depth_classes);
  return m;
}

toc::data::FeatureBundle compute_features(const Model& m, const toc::Document& doc) {
  toc::data::FeatureBundle f;
  const auto stats = toc::encoder::compute_layout_stats(doc);
  f.layout = toc::encoder::layout_features(doc, stats);
  f.text = toc::encoder::embed_entities(*m.embedder, doc);
  f.vision = toc::encoder::pooled_features(m.vision, doc);
  return f;
}

std::string features_fingerprint(const Model& m) {
  return m.embedder->fingerprint() + "|" + toc::encoder::vision_fingerprint(m.vision);
}

DocLabels labels_from_document(const toc::Document& doc, int depth_classes) {
  DocLabels labels;
  labels.headings.reserve(doc.entities.size());
  for (const auto& e : doc.entities) labels.headings.push_back(e.heading);
  labels.heading_orders = toc::heading_indices(doc);
  labels.steps = toc::treeops::steps_from_ids(doc);
  labels.depths = toc::treeops::depths_from_ids(doc, depth_classes);
  return labels;
}

namespace {

// Encodes every entity of the document into fused dim x N states. Vision
// enters as cached constants unless the backbone trains, in which case the
// pages run through the live backbone on this tape.
Var encode_entities(Tape& t, const Model& m, const toc::Document& doc,
                    const toc::data::FeatureBundle& f) {
  const int n = static_cast<int>(doc.entities.size());
  Var f_p = t.input(f.layout);
  Var f_s = toc::nn::linear(t, m.txt_proj, t.input(f.text));

  Var pooled;
  if (m.cfg.vision.train_backbone) {
    std::vector<Var> cols(static_cast<size_t>(n));
    std::vector<int> missing;
    for (int p = 0; p < static_cast<int>(doc.pages.size()); ++p) {
      std::vector<toc::Box> boxes;
      std::vector<int> owners;
      for (int i = 0; i < n; ++i)
        if (doc.entities[i].page == p) {
          boxes.push_back(doc.entities[i].box);
          owners.push_back(i);
        }
      if (boxes.empty()) continue;
      if (!doc.pages[p].raster) {
        for (int i : owners) missing.push_back(i);
        continue;
      }
      const auto prep = toc::encoder::prepare_raster(*doc.pages[p].raster, doc.pages[p]);
      Var page_feats = toc::encoder::vision_forward_page(t, m.vision, prep, boxes);
      for (size_t b = 0; b < owners.size(); ++b)
        cols[static_cast<size_t>(owners[b])] =
            t.block(page_feats, 0, static_cast<int>(b), m.cfg.vision.pooled_dim(), 1);
    }
    for (int i : missing)
      cols[static_cast<size_t>(i)] =
          t.input(Eigen::MatrixXd::Zero(m.cfg.vision.pooled_dim(), 1));
    pooled = t.hcat(cols);
  } else {
    pooled = t.input(f.vision);
  }
  Var f_v = toc::nn::linear(t, m.vis_proj, pooled);
  return toc::encoder::fuse(t, m.fusion, m.cfg.fusion, m.cfg.mask, f_v, f_s, f_p);
}

Var gather_columns(Tape& t, Var g, const std::vector<int>& idx, int dim) {
  std::vector<Var> cols;
  cols.reserve(idx.size());
  for (int i : idx) cols.push_back(t.block(g, 0, i, dim, 1));
  return t.hcat(cols);
}

}  // namespace

Var document_loss(Tape& t, const Model& m, const toc::Document& doc,
                  const toc::data::FeatureBundle& f, const DocLabels& labels) {
  Var fused = encode_entities(t, m, doc, f);
  Var g = toc::classifier::contextualize(t, m.classifier, fused);
  Var logits = toc::classifier::heading_logits(t, m.classifier, g);
  Var loss =
      toc::classifier::classification_loss(t, logits, labels.headings, m.cfg.gamma,
                                           m.cfg.alpha);
  if (labels.heading_orders.empty()) return loss;

  Var heads = gather_columns(t, g, labels.heading_orders, m.cfg.dim);
  Var memory = toc::decoder::heading_memory(t, m.decoder, heads);
  if (m.cfg.depth_decoder) {
    Var dlogits = toc::decoder::depth_logits(t, m.decoder, memory);
    std::vector<int> classes;
    classes.reserve(labels.depths.size());
    for (int d : labels.depths) classes.push_back(d - 1);
    Var dloss = toc::nn::focal_from_logits(t, dlogits, classes, m.cfg.gamma, m.cfg.alpha);
    return t.add(loss, dloss);
  }
  auto dec = toc::decoder::decode(t, m.decoder, memory, &labels.steps);
  Var l_ref = toc::decoder::reference_loss(t, dec, labels.steps, m.cfg.gamma, m.cfg.alpha);
  Var l_rel = toc::decoder::relation_loss(t, dec, labels.steps, m.cfg.gamma, m.cfg.alpha);
  return t.add(loss, t.add(l_ref, l_rel));
}

Prediction predict(const Model& m, const toc::Document& doc,
                   const toc::data::FeatureBundle& f) {
  Prediction out;
  Tape t;
  Var fused = encode_entities(t, m, doc, f);
  Var g = toc::classifier::contextualize(t, m.classifier, fused);
  Var logits = toc::classifier::heading_logits(t, m.classifier, g);
  out.heading_flags = toc::classifier::predict_headings(logits.value());
  for (int i = 0; i < static_cast<int>(out.heading_flags.size()); ++i)
    if (out.heading_flags[i]) out.heading_orders.push_back(i);
  if (out.heading_orders.empty()) {
    out.warnings.push_back("no headings predicted; empty tree");
    return out;
  }

  std::vector<std::string> texts;
  for (int i : out.heading_orders) texts.push_back(doc.entities[i].content);

  Var heads = gather_columns(t, g, out.heading_orders, m.cfg.dim);
  Var memory = toc::decoder::heading_memory(t, m.decoder, heads);
  if (m.cfg.depth_decoder) {
    Var dlogits = toc::decoder::depth_logits(t, m.decoder, memory);
    const auto depths = toc::decoder::predict_depths(dlogits.value());
    out.tree = toc::treeops::tree_from_depths(depths, texts, m.cfg.depth_classes,
                                              &out.warnings);
    return out;
  }
  auto dec = toc::decoder::decode(t, m.decoder, memory, nullptr);
  out.steps = dec.steps;
  out.attention = std::move(dec.attention);
  out.coerced_steps = dec.coerced_steps;
  if (dec.coerced_steps > 0)
    out.warnings.push_back(std::to_string(dec.coerced_steps) +
                           " step(s) pointed a sibling/identity at the root; "
                           "coerced to parent");
  out.tree = toc::treeops::tree_from_steps(out.steps, texts, out.heading_orders);
  return out;
}

namespace {

constexpr char kCkptMagic[8] = {'T', 'O', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Model& m) {
  json manifest;
  manifest["config"] = json::parse(config_to_json(m.cfg));
  json plist = json::array();
  for (const auto& p : m.store.all())
    plist.push_back({{"name", p.name},
                     {"rows", p.value.rows()},
                     {"cols", p.value.cols()},
                     {"trainable", p.trainable}});
  manifest["params"] = plist;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot write " + path);
  os.write(kCkptMagic, sizeof kCkptMagic);
  std::uint32_t version = kCkptVersion;
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : m.store.all())
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * p.value.size()));
  if (!os) throw DataError("checkpoint: short write to " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is.good() || std::memcmp(magic, kCkptMagic, sizeof kCkptMagic) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!is.good() || version != kCkptVersion)
    throw DataError("checkpoint: unsupported version in " + path);
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is.good() || len > (1u << 26)) throw DataError("checkpoint: bad manifest length");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is.good()) throw DataError("checkpoint: truncated manifest");

  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  Model m = make_model(config_from_json(manifest.at("config").dump()));
  const auto& plist = manifest.at("params");
  if (plist.size() != m.store.count())
    throw DataError("checkpoint: parameter count mismatch");
  for (const auto& entry : plist) {
    auto* p = m.store.find(entry.at("name").get<std::string>());
    if (!p) throw DataError("checkpoint: unknown parameter " +
                            entry.at("name").get<std::string>());
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw DataError("checkpoint: shape mismatch for " + p->name);
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    if (!is.good()) throw DataError("checkpoint: truncated weights at " + p->name);
  }
  return m;
}

}  // namespace toc::train
