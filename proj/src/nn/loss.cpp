#include "toc/nn/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace toc::nn {

namespace {
constexpr double kProbFloor = 1e-7;
}

double focal_scalar(double p_true, double gamma, double alpha) {
  const double p = std::min(std::max(p_true, kProbFloor), 1.0 - kProbFloor);
  return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
}

Var focal_from_probs(Tape& t, Var probs, const std::vector<int>& labels, double gamma,
                     double alpha) {
  const int n = static_cast<int>(probs.cols());
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("focal_from_probs: one label per column required");
  std::vector<Var> terms;
  terms.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= probs.rows())
      throw std::invalid_argument("focal_from_probs: label out of range");
    const Var p = t.clamp(t.pick(probs, labels[i], i), kProbFloor, 1.0 - kProbFloor);
    const Var mod = t.pow_const(t.add_const(t.neg(p), 1.0), gamma);
    terms.push_back(t.scale(t.cmul(mod, t.log(p)), -alpha));
  }
  return t.mean_all(t.hcat(terms));
}

Var focal_from_logits(Tape& t, Var logits, const std::vector<int>& labels, double gamma,
                      double alpha) {
  return focal_from_probs(t, t.softmax_col(logits), labels, gamma, alpha);
}

}  // namespace toc::nn
