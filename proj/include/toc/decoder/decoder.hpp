#ifndef TOC_DECODER_DECODER_HPP
#define TOC_DECODER_DECODER_HPP

#include <optional>
#include <string>
#include <vector>

#include "toc/core/types.hpp"
#include "toc/nn/layers.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::decoder {

struct DecoderConfig {
  int dim = 128;      // heading representation width
  int hidden = 128;   // decoder GRU state width
  int attn = 128;     // attention energy width
  int cov_channels = 128;
  int cov_kernel = 3;
  int tf_layers = 3;
  int tf_heads = 4;
  int tf_ffn = 256;
  bool positional = true;
  int relation_hidden = 128;
};

struct DecoderParams {
  DecoderConfig cfg;
  std::vector<toc::nn::TransformerLayerParams> tf;
  toc::nn::Parameter* root = nullptr;  // learned root column of M
  toc::nn::GruParams gru_in;           // state update from the previous selection
  toc::nn::GruParams gru_out;          // state update from the current selection
  toc::nn::Parameter* att_wh = nullptr;  // attn x hidden
  toc::nn::Parameter* att_wm = nullptr;  // attn x dim
  toc::nn::Parameter* att_wd = nullptr;  // attn x cov_channels
  toc::nn::Parameter* att_v = nullptr;   // 1 x attn
  toc::nn::Parameter* cov_q = nullptr;   // cov_channels x cov_kernel
  toc::nn::LinearParams rel1;            // (dim + hidden) -> relation_hidden
  toc::nn::LinearParams rel2;            // relation_hidden -> 3
  toc::nn::LinearParams depth;           // dim -> depth classes (baseline head)
  int depth_classes = 5;
};

DecoderParams make_decoder(toc::nn::ParameterStore& store, const DecoderConfig& cfg,
                           std::mt19937_64& rng, int depth_classes = 5);

// Transformer over the heading states (one column per heading, document
// order) with optional sinusoidal positions, then the learned root column is
// prepended: output is dim x (C+1) with the root at column 0.
toc::nn::Var heading_memory(toc::nn::Tape& t, const DecoderParams& p,
                            toc::nn::Var g_headings);

struct DecodeResult {
  std::vector<toc::RelationStep> steps;
  std::vector<toc::nn::Var> ref_probs;   // per step: (C+1) x 1 masked softmax
  std::vector<toc::nn::Var> rel_logits;  // per step: 3 x 1
  std::vector<Eigen::VectorXd> attention;  // ref_probs values, for inspection
  std::vector<Eigen::VectorXd> selected;   // c_s values, the chosen memory columns
  int coerced_steps = 0;  // sibling/identity aimed at the root, fixed to parent
};

// Walks headings 1..C. With `teacher`, gold references and relations drive
// the selections (loss mode); otherwise selections are the masked argmax and
// relations at the root are coerced to parent.
DecodeResult decode(toc::nn::Tape& t, const DecoderParams& p, toc::nn::Var memory,
                    const std::vector<toc::RelationStep>* teacher);

toc::nn::Var reference_loss(toc::nn::Tape& t, const DecodeResult& r,
                            const std::vector<toc::RelationStep>& gold, double gamma,
                            double alpha);
toc::nn::Var relation_loss(toc::nn::Tape& t, const DecodeResult& r,
                           const std::vector<toc::RelationStep>& gold, double gamma,
                           double alpha);

// Depth-classifier baseline over the transformer output (no root column).
toc::nn::Var depth_logits(toc::nn::Tape& t, const DecoderParams& p, toc::nn::Var memory);
std::vector<int> predict_depths(const toc::nn::Mat& logits);

}  // namespace toc::decoder

#endif
