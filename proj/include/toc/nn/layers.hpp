#ifndef TOC_NN_LAYERS_HPP
#define TOC_NN_LAYERS_HPP

#include <string>
#include <vector>

#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::nn {

struct LinearParams {
  Parameter* W = nullptr;  // out x in
  Parameter* b = nullptr;  // out x 1
};

LinearParams make_linear(ParameterStore& store, const std::string& name, int in, int out,
                         std::mt19937_64& rng, Init init = Init::XavierUniform);
Var linear(Tape& t, const LinearParams& p, Var x);

// Gated recurrent unit, gate order (reset, update, candidate) packed into
// 3h-row matrices. Update rule matches the common formulation
//   r = sigmoid(Wi_r x + bi_r + Ui_r h + bh_r)
//   z = sigmoid(Wi_z x + bi_z + Ui_z h + bh_z)
//   n = tanh(Wi_n x + bi_n + r * (Ui_n h + bh_n))
//   h' = (1 - z) * n + z * h
struct GruParams {
  Parameter* Wi = nullptr;  // 3h x in
  Parameter* Ui = nullptr;  // 3h x h
  Parameter* bi = nullptr;  // 3h x 1
  Parameter* bh = nullptr;  // 3h x 1
  int hidden = 0;
};

GruParams make_gru(ParameterStore& store, const std::string& name, int in, int hidden,
                   std::mt19937_64& rng);
Var gru_step(Tape& t, const GruParams& p, Var x, Var h_prev);
// Runs the cell over a sequence starting from a zero state; returns one
// hidden state per input.
std::vector<Var> gru_sequence(Tape& t, const GruParams& p, const std::vector<Var>& xs);

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
};

LayerNormParams make_layer_norm(ParameterStore& store, const std::string& name, int dim,
                                std::mt19937_64& rng);

// Pre-norm transformer encoder layer (self-attention + position-wise FFN,
// residual around each sublayer). X is d x C, one column per element.
struct TransformerLayerParams {
  LinearParams q, k, v, o;
  LinearParams ff1, ff2;
  LayerNormParams ln1, ln2;
  int heads = 1;
};

TransformerLayerParams make_transformer_layer(ParameterStore& store, const std::string& name,
                                              int dim, int heads, int ffn_dim,
                                              std::mt19937_64& rng);
Var transformer_layer(Tape& t, const TransformerLayerParams& p, Var X);

// Sinusoidal position table, d x n (positions 0..n-1 as columns).
Mat positional_encoding(int dim, int n);

}  // namespace toc::nn

#endif
