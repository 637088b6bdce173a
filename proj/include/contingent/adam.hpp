#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "contingent/errors.hpp"
#include "contingent/tensor.hpp"

namespace contingent {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers for one group of named parameter tensors. The group's
// composition must not change between steps.
class AdamState {
 public:
  explicit AdamState(const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor->numel(), 0.0);
      v_.emplace_back(p.tensor->numel(), 0.0);
    }
  }

  std::size_t step_count() const { return t_; }

  // Consumes Tensor::grad of each parameter. Grads must be populated
  // (backward run and not yet zeroed); caller zeroes afterwards.
  void step(const std::vector<NamedParam>& params, const AdamConfig& cfg) {
    if (params.size() != m_.size())
      throw StructuralError("adam: parameter group size changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor& t = *params[p].tensor;
      if (t.grad.size() != t.data.size())
        throw StructuralError("adam: missing gradient for " + params[p].name);
      if (m_[p].size() != t.numel())
        throw StructuralError("adam: shape changed for " + params[p].name);
      double* m = m_[p].data();
      double* v = v_[p].data();
      for (std::size_t i = 0; i < t.numel(); ++i) {
        const double g = t.grad[i];
        if (!std::isfinite(g))
          throw NumericError("adam: non-finite gradient in " + params[p].name);
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        t.data[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      }
    }
  }

 private:
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace contingent
