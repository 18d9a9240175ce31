#ifndef TOC_CLASSIFIER_CLASSIFIER_HPP
#define TOC_CLASSIFIER_CLASSIFIER_HPP

#include <vector>

#include "toc/nn/layers.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::classifier {

// Bidirectional GRU over the fused entity sequence followed by a projection
// back to d; the projected states feed both the heading head and the tree
// decoder.
struct ClassifierParams {
  toc::nn::GruParams fwd;
  toc::nn::GruParams bwd;
  toc::nn::LinearParams proj;  // 2*hidden -> d
  toc::nn::LinearParams head;  // d -> 2 (row 0 = body, row 1 = heading)
  int hidden = 0;
};

ClassifierParams make_classifier(toc::nn::ParameterStore& store, int dim, int hidden,
                                 std::mt19937_64& rng);

// fused is d x N in document order; returns d x N contextual states.
toc::nn::Var contextualize(toc::nn::Tape& t, const ClassifierParams& p, toc::nn::Var fused);

// 2 x N class logits.
toc::nn::Var heading_logits(toc::nn::Tape& t, const ClassifierParams& p, toc::nn::Var g);

std::vector<bool> predict_headings(const toc::nn::Mat& logits);

// Mean focal loss with labels heading=1, body=0.
toc::nn::Var classification_loss(toc::nn::Tape& t, toc::nn::Var logits,
                                 const std::vector<bool>& gold, double gamma, double alpha);

}  // namespace toc::classifier

#endif
