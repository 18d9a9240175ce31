#ifndef TOC_TESTS_GRADCHECK_HPP
#define TOC_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "name(i,j)"
};

// Compares analytic gradients of `loss_fn` (which must build a fresh tape,
// run backward, and leave grads in the store) against central finite
// differences over every coordinate of every trainable parameter.
inline GradCheckResult gradient_check(nn::ParameterStore& store,
                                      const std::function<double()>& loss_fn,
                                      double h = 1e-5) {
  store.zero_grad();
  loss_fn();
  std::vector<nn::Mat> analytic;
  for (auto& p : store.all()) analytic.push_back(p.grad);

  GradCheckResult res;
  size_t pi = 0;
  for (auto& p : store.all()) {
    if (p.trainable) {
      for (int i = 0; i < p.value.rows(); ++i) {
        for (int j = 0; j < p.value.cols(); ++j) {
          const double orig = p.value(i, j);
          const double step = h * std::max(1.0, std::abs(orig));
          p.value(i, j) = orig + step;
          store.zero_grad();
          double fp = loss_fn();
          p.value(i, j) = orig - step;
          store.zero_grad();
          double fm = loss_fn();
          p.value(i, j) = orig;
          const double numeric = (fp - fm) / (2.0 * step);
          const double a = analytic[pi](i, j);
          if (std::abs(a) < 1e-7 && std::abs(numeric) < 1e-7) continue;
          const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
          if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst = p.name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
          }
        }
      }
    }
    ++pi;
  }
  store.zero_grad();
  return res;
}

}  // namespace toc::testing

#endif
