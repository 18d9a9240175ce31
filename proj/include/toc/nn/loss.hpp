#ifndef TOC_NN_LOSS_HPP
#define TOC_NN_LOSS_HPP

#include <vector>

#include "toc/nn/tape.hpp"

namespace toc::nn {

// Focal term for a single true-class probability, plain arithmetic.
double focal_scalar(double p_true, double gamma, double alpha);

// Mean focal loss over columns. probs is K x N and column-stochastic;
// labels[i] selects the true row of column i. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before the log.
Var focal_from_probs(Tape& t, Var probs, const std::vector<int>& labels, double gamma,
                     double alpha);

// Softmax over each column, then focal.
Var focal_from_logits(Tape& t, Var logits, const std::vector<int>& labels, double gamma,
                      double alpha);

}  // namespace toc::nn

#endif
