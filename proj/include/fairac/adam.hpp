#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fairac/tensor.hpp"

namespace fairac {

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction and coupled L2 weight decay: the decay term is
// added to the gradient before the moment update, matching the graph-learning
// codebases this pipeline follows (decoupled decay changes trajectories).
class AdamState {
 public:
  AdamState() = default;

  explicit AdamState(std::vector<Tensor> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].size(), 0.0);
      v_[i].assign(params_[i].size(), 0.0);
    }
  }

  // One update over all managed parameters; zeroes their gradients afterward.
  void step() {
    for (const Tensor& p : params_)
      if (!p.has_grad())
        throw std::logic_error("AdamState::step: parameter has no gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      std::vector<double>& val = params_[i].value();
      std::vector<double>& grad = params_[i].grad();
      std::vector<double>& m = m_[i];
      std::vector<double>& v = v_[i];
      for (std::size_t j = 0; j < val.size(); ++j) {
        const double g = grad[j] + cfg_.weight_decay * val[j];
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[j] / bc1;
        const double v_hat = v[j] / bc2;
        val[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
    }
    zero_grad();
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
  AdamConfig cfg_;
};

}  // namespace fairac
