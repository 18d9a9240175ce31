#include "toc/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace toc::nn {

Parameter* ParameterStore::create(const std::string& name, int rows, int cols, Init init,
                                  std::mt19937_64& rng, bool trainable) {
  if (by_name_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.trainable = trainable;
  p.value = Mat::Zero(rows, cols);
  switch (init) {
    case Init::Zero:
      break;
    case Init::One:
      p.value.setOnes();
      break;
    case Init::XavierUniform: {
      double a = std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) p.value(i, j) = u(rng);
      break;
    }
    case Init::HeNormal: {
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / cols));
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) p.value(i, j) = n(rng);
      break;
    }
    case Init::SmallNormal: {
      std::normal_distribution<double> n(0.0, 0.02);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) p.value(i, j) = n(rng);
      break;
    }
  }
  p.grad = Mat::Zero(rows, cols);
  p.adam_m = Mat::Zero(rows, cols);
  p.adam_v = Mat::Zero(rows, cols);
  params_.push_back(std::move(p));
  Parameter* ptr = &params_.back();
  by_name_[name] = ptr;
  return ptr;
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void Adam::step(ParameterStore& store, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& p : store.all()) {
    if (!p.trainable) continue;
    p.adam_m = cfg_.beta1 * p.adam_m + (1.0 - cfg_.beta1) * p.grad;
    p.adam_v = cfg_.beta2 * p.adam_v.array().matrix() +
               (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = p.adam_m / bc1;
    Mat vhat = p.adam_v / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
  }
}

double cosine_lr(int step, int total, double lr_init, double lr_min) {
  if (total <= 1) return lr_init;
  double t = static_cast<double>(std::min(step, total - 1)) / (total - 1);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(t * M_PI));
}

}  // namespace toc::nn
