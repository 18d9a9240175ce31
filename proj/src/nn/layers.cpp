#include "toc/nn/layers.hpp"

#include <cmath>

namespace toc::nn {

LinearParams make_linear(ParameterStore& store, const std::string& name, int in, int out,
                         std::mt19937_64& rng, Init init) {
  LinearParams p;
  p.W = store.create(name + ".W", out, in, init, rng);
  p.b = store.create(name + ".b", out, 1, Init::Zero, rng);
  return p;
}

Var linear(Tape& t, const LinearParams& p, Var x) {
  return t.add_bias(t.matmul(t.param(*p.W), x), t.param(*p.b));
}

GruParams make_gru(ParameterStore& store, const std::string& name, int in, int hidden,
                   std::mt19937_64& rng) {
  GruParams p;
  p.Wi = store.create(name + ".Wi", 3 * hidden, in, Init::XavierUniform, rng);
  p.Ui = store.create(name + ".Ui", 3 * hidden, hidden, Init::XavierUniform, rng);
  p.bi = store.create(name + ".bi", 3 * hidden, 1, Init::Zero, rng);
  p.bh = store.create(name + ".bh", 3 * hidden, 1, Init::Zero, rng);
  p.hidden = hidden;
  return p;
}

Var gru_step(Tape& t, const GruParams& p, Var x, Var h_prev) {
  const int h = p.hidden;
  Var gi = t.add_bias(t.matmul(t.param(*p.Wi), x), t.param(*p.bi));
  Var gh = t.add_bias(t.matmul(t.param(*p.Ui), h_prev), t.param(*p.bh));
  Var r = t.sigmoid(t.add(t.block(gi, 0, 0, h, 1), t.block(gh, 0, 0, h, 1)));
  Var z = t.sigmoid(t.add(t.block(gi, h, 0, h, 1), t.block(gh, h, 0, h, 1)));
  Var n = t.tanh(t.add(t.block(gi, 2 * h, 0, h, 1), t.cmul(r, t.block(gh, 2 * h, 0, h, 1))));
  Var one = t.input(Mat::Ones(h, 1));
  return t.add(t.cmul(t.sub(one, z), n), t.cmul(z, h_prev));
}

std::vector<Var> gru_sequence(Tape& t, const GruParams& p, const std::vector<Var>& xs) {
  std::vector<Var> hs;
  hs.reserve(xs.size());
  Var h = t.input(Mat::Zero(p.hidden, 1));
  for (Var x : xs) {
    h = gru_step(t, p, x, h);
    hs.push_back(h);
  }
  return hs;
}

LayerNormParams make_layer_norm(ParameterStore& store, const std::string& name, int dim,
                                std::mt19937_64& rng) {
  LayerNormParams p;
  p.gain = store.create(name + ".gain", dim, 1, Init::One, rng);
  p.bias = store.create(name + ".bias", dim, 1, Init::Zero, rng);
  return p;
}

TransformerLayerParams make_transformer_layer(ParameterStore& store, const std::string& name,
                                              int dim, int heads, int ffn_dim,
                                              std::mt19937_64& rng) {
  TransformerLayerParams p;
  p.q = make_linear(store, name + ".q", dim, dim, rng);
  p.k = make_linear(store, name + ".k", dim, dim, rng);
  p.v = make_linear(store, name + ".v", dim, dim, rng);
  p.o = make_linear(store, name + ".o", dim, dim, rng);
  p.ff1 = make_linear(store, name + ".ff1", dim, ffn_dim, rng);
  p.ff2 = make_linear(store, name + ".ff2", ffn_dim, dim, rng);
  p.ln1 = make_layer_norm(store, name + ".ln1", dim, rng);
  p.ln2 = make_layer_norm(store, name + ".ln2", dim, rng);
  p.heads = heads;
  return p;
}

Var transformer_layer(Tape& t, const TransformerLayerParams& p, Var X) {
  const int d = X.rows();
  const int heads = p.heads;
  const int hd = d / heads;

  Var Xn = t.layer_norm_cols(X, t.param(*p.ln1.gain), t.param(*p.ln1.bias));
  Var Q = linear(t, p.q, Xn);
  Var K = linear(t, p.k, Xn);
  Var V = linear(t, p.v, Xn);

  std::vector<Var> head_out;
  head_out.reserve(heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int h = 0; h < heads; ++h) {
    Var Qh = t.block(Q, h * hd, 0, hd, X.cols());
    Var Kh = t.block(K, h * hd, 0, hd, X.cols());
    Var Vh = t.block(V, h * hd, 0, hd, X.cols());
    // scores(i, j) = <key i, query j>; softmax over keys per query column
    Var scores = t.scale(t.matmul(t.transpose(Kh), Qh), inv_sqrt);
    Var att = t.softmax_col(scores);
    head_out.push_back(t.matmul(Vh, att));
  }
  Var attn = linear(t, p.o, t.vcat(head_out));
  Var X1 = t.add(X, attn);

  Var X1n = t.layer_norm_cols(X1, t.param(*p.ln2.gain), t.param(*p.ln2.bias));
  Var ff = linear(t, p.ff2, t.relu(linear(t, p.ff1, X1n)));
  return t.add(X1, ff);
}

Mat positional_encoding(int dim, int n) {
  Mat pe(dim, n);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < dim; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / dim;
      double angle = pos / std::pow(10000.0, exponent);
      pe(i, pos) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace toc::nn
