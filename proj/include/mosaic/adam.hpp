#pragma once

#include <cmath>
#include <vector>

namespace mosaic {

// Standard Adam state over a flat parameter vector.
class AdamState {
public:
  explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update of params in-place given the gradient and a learning rate.
  template <typename Params>
  void step(Params& params, const std::vector<double>& grad, double lr) {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      double mhat = m_[i] / c1;
      double vhat = v_[i] / c2;
      params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }

private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

} // namespace mosaic
