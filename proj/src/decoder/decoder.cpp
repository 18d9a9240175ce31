#include "toc/decoder/decoder.hpp"

#include <stdexcept>

#include "toc/nn/loss.hpp"

namespace toc::decoder {

using toc::nn::Init;
using toc::nn::Mat;
using toc::nn::Tape;
using toc::nn::Var;

DecoderParams make_decoder(toc::nn::ParameterStore& store, const DecoderConfig& cfg,
                           std::mt19937_64& rng, int depth_classes) {
  DecoderParams p;
  p.cfg = cfg;
  p.depth_classes = depth_classes;
  for (int l = 0; l < cfg.tf_layers; ++l)
    p.tf.push_back(toc::nn::make_transformer_layer(
        store, "dec.tf" + std::to_string(l), cfg.dim, cfg.tf_heads, cfg.tf_ffn, rng));
  p.root = store.create("dec.root", cfg.dim, 1, Init::SmallNormal, rng);
  p.gru_in = toc::nn::make_gru(store, "dec.gru_in", cfg.dim, cfg.hidden, rng);
  p.gru_out = toc::nn::make_gru(store, "dec.gru_out", cfg.dim, cfg.hidden, rng);
  p.att_wh = store.create("dec.att.wh", cfg.attn, cfg.hidden, Init::XavierUniform, rng);
  p.att_wm = store.create("dec.att.wm", cfg.attn, cfg.dim, Init::XavierUniform, rng);
  p.att_wd =
      store.create("dec.att.wd", cfg.attn, cfg.cov_channels, Init::XavierUniform, rng);
  p.att_v = store.create("dec.att.v", 1, cfg.attn, Init::XavierUniform, rng);
  p.cov_q =
      store.create("dec.cov.q", cfg.cov_channels, cfg.cov_kernel, Init::XavierUniform, rng);
  p.rel1 = toc::nn::make_linear(store, "dec.rel1", cfg.dim + cfg.hidden,
                                cfg.relation_hidden, rng);
  p.rel2 = toc::nn::make_linear(store, "dec.rel2", cfg.relation_hidden, 3, rng);
  p.depth = toc::nn::make_linear(store, "dec.depth", cfg.dim, depth_classes, rng);
  return p;
}

Var heading_memory(Tape& t, const DecoderParams& p, Var g_headings) {
  const int c = static_cast<int>(g_headings.cols());
  Var root = t.param(*p.root);
  if (c == 0) return root;
  Var x = g_headings;
  if (p.cfg.positional)
    x = t.add(x, t.input(toc::nn::positional_encoding(p.cfg.dim, c)));
  for (const auto& layer : p.tf) x = toc::nn::transformer_layer(t, layer, x);
  return t.hcat({root, x});
}

DecodeResult decode(Tape& t, const DecoderParams& p, Var memory,
                    const std::vector<toc::RelationStep>* teacher) {
  const int c = static_cast<int>(memory.cols()) - 1;
  DecodeResult r;
  if (c <= 0) return r;
  if (teacher) {
    toc::validate_steps(*teacher);
    if (static_cast<int>(teacher->size()) != c)
      throw std::invalid_argument("decode: teacher steps do not match heading count");
  }

  const Var wh = t.param(*p.att_wh);
  const Var wd = t.param(*p.att_wd);
  const Var v = t.param(*p.att_v);
  const Var q = t.param(*p.cov_q);
  const Var proj_m = t.matmul(t.param(*p.att_wm), memory);  // attn x (C+1)

  Var h = t.input(Mat::Zero(p.cfg.hidden, 1));
  Var c_prev = t.input(Mat::Zero(p.cfg.dim, 1));
  Mat hist = Mat::Zero(1, c + 1);  // selection counts driving coverage

  for (int s = 1; s <= c; ++s) {
    const Var h_hat = toc::nn::gru_step(t, p.gru_in, c_prev, h);
    const Var cov = t.conv1d_cols(q, t.input(hist));
    const Var pre =
        t.tanh(t.add_bias(t.add(proj_m, t.matmul(wd, cov)), t.matmul(wh, h_hat)));
    const Var energies = t.matmul(v, pre);  // 1 x (C+1)

    std::vector<std::uint8_t> valid(c + 1, 0);
    for (int i = 0; i < s; ++i) valid[i] = 1;
    const Var probs = t.softmax_masked(t.transpose(energies), valid);
    r.ref_probs.push_back(probs);
    r.attention.push_back(probs.value().col(0));

    int sel = 0;
    if (teacher) {
      sel = (*teacher)[s - 1].reference;
    } else {
      double best = -1.0;
      for (int i = 0; i < s; ++i) {
        if (probs.value()(i, 0) > best) {
          best = probs.value()(i, 0);
          sel = i;
        }
      }
    }

    const Var c_s = t.block(memory, 0, sel, p.cfg.dim, 1);
    r.selected.push_back(c_s.value().col(0));
    const Var h_s = toc::nn::gru_step(t, p.gru_out, c_s, h_hat);
    const Var rlog = toc::nn::linear(
        t, p.rel2, t.relu(toc::nn::linear(t, p.rel1, t.vcat({c_s, h_s}))));
    r.rel_logits.push_back(rlog);

    toc::Relation rel = toc::Relation::Parent;
    if (teacher) {
      rel = (*teacher)[s - 1].relation;
    } else {
      int best_row = 0;
      for (int k = 1; k < 3; ++k)
        if (rlog.value()(k, 0) > rlog.value()(best_row, 0)) best_row = k;
      rel = static_cast<toc::Relation>(best_row);
      if (sel == 0 && rel != toc::Relation::Parent) {
        rel = toc::Relation::Parent;
        ++r.coerced_steps;
      }
    }
    r.steps.push_back({s, sel, rel});

    hist(0, sel) += 1.0;
    h = h_s;
    c_prev = c_s;
  }
  return r;
}

Var reference_loss(Tape& t, const DecodeResult& r, const std::vector<toc::RelationStep>& gold,
                   double gamma, double alpha) {
  if (gold.size() != r.ref_probs.size())
    throw std::invalid_argument("reference_loss: step counts differ");
  std::vector<int> labels(gold.size());
  for (size_t i = 0; i < gold.size(); ++i) labels[i] = gold[i].reference;
  return toc::nn::focal_from_probs(t, t.hcat(r.ref_probs), labels, gamma, alpha);
}

Var relation_loss(Tape& t, const DecodeResult& r, const std::vector<toc::RelationStep>& gold,
                  double gamma, double alpha) {
  if (gold.size() != r.rel_logits.size())
    throw std::invalid_argument("relation_loss: step counts differ");
  std::vector<int> labels(gold.size());
  for (size_t i = 0; i < gold.size(); ++i) labels[i] = static_cast<int>(gold[i].relation);
  return toc::nn::focal_from_logits(t, t.hcat(r.rel_logits), labels, gamma, alpha);
}

Var depth_logits(Tape& t, const DecoderParams& p, Var memory) {
  const int c = static_cast<int>(memory.cols()) - 1;
  if (c <= 0) return t.input(Mat::Zero(p.depth_classes, 0));
  const Var heads = t.block(memory, 0, 1, p.cfg.dim, c);
  return toc::nn::linear(t, p.depth, heads);
}

std::vector<int> predict_depths(const toc::nn::Mat& logits) {
  std::vector<int> out(static_cast<size_t>(logits.cols()));
  for (int i = 0; i < logits.cols(); ++i) {
    int best = 0;
    for (int k = 1; k < logits.rows(); ++k)
      if (logits(k, i) > logits(best, i)) best = k;
    out[i] = best + 1;  // depths are 1-based
  }
  return out;
}

}  // namespace toc::decoder
