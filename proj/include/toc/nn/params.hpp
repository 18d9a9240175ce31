#ifndef TOC_NN_PARAMS_HPP
#define TOC_NN_PARAMS_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "toc/nn/tape.hpp"

namespace toc::nn {

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  bool trainable = true;
};

enum class Init { Zero, One, XavierUniform, HeNormal, SmallNormal };

// Owns every trainable (and frozen) weight of a model. Addresses are stable
// for the lifetime of the store.
class ParameterStore {
 public:
  Parameter* create(const std::string& name, int rows, int cols, Init init,
                    std::mt19937_64& rng, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  void zero_grad();
  size_t count() const { return params_.size(); }
  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, Parameter*> by_name_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  // Applies one update to every trainable parameter using accumulated grads.
  void step(ParameterStore& store, double lr);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
};

// Cosine annealing from lr_init at step 0 down to lr_min at step total-1.
double cosine_lr(int step, int total, double lr_init, double lr_min);

}  // namespace toc::nn

#endif
