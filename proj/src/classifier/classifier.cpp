#include "toc/classifier/classifier.hpp"

#include <algorithm>

#include "toc/nn/loss.hpp"

namespace toc::classifier {

using toc::nn::Tape;
using toc::nn::Var;

ClassifierParams make_classifier(toc::nn::ParameterStore& store, int dim, int hidden,
                                 std::mt19937_64& rng) {
  ClassifierParams p;
  p.hidden = hidden;
  p.fwd = toc::nn::make_gru(store, "cls.fwd", dim, hidden, rng);
  p.bwd = toc::nn::make_gru(store, "cls.bwd", dim, hidden, rng);
  p.proj = toc::nn::make_linear(store, "cls.proj", 2 * hidden, dim, rng);
  p.head = toc::nn::make_linear(store, "cls.head", dim, 2, rng);
  return p;
}

Var contextualize(Tape& t, const ClassifierParams& p, Var fused) {
  const int n = static_cast<int>(fused.cols());
  const int d = static_cast<int>(fused.rows());
  if (n == 0) return fused;
  std::vector<Var> cols, rcols;
  cols.reserve(n);
  rcols.reserve(n);
  for (int i = 0; i < n; ++i) cols.push_back(t.block(fused, 0, i, d, 1));
  for (int i = n - 1; i >= 0; --i) rcols.push_back(cols[i]);

  const std::vector<Var> hf = toc::nn::gru_sequence(t, p.fwd, cols);
  const std::vector<Var> hb = toc::nn::gru_sequence(t, p.bwd, rcols);

  std::vector<Var> joined;
  joined.reserve(n);
  for (int i = 0; i < n; ++i) joined.push_back(t.vcat({hf[i], hb[n - 1 - i]}));
  return toc::nn::linear(t, p.proj, t.hcat(joined));
}

Var heading_logits(Tape& t, const ClassifierParams& p, Var g) {
  return toc::nn::linear(t, p.head, g);
}

std::vector<bool> predict_headings(const toc::nn::Mat& logits) {
  std::vector<bool> out(static_cast<size_t>(logits.cols()));
  for (int i = 0; i < logits.cols(); ++i) out[i] = logits(1, i) > logits(0, i);
  return out;
}

Var classification_loss(Tape& t, Var logits, const std::vector<bool>& gold, double gamma,
                        double alpha) {
  std::vector<int> labels(gold.size());
  std::transform(gold.begin(), gold.end(), labels.begin(),
                 [](bool h) { return h ? 1 : 0; });
  return toc::nn::focal_from_logits(t, logits, labels, gamma, alpha);
}

}  // namespace toc::classifier
