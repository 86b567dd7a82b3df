#include "searnn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace searnn {

double clip_gradients(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : store.params()) {
    const Tensor& g = store.grad(name);
    for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& [name, p] : store.params()) {
      Tensor& g = store.grad(name);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
    }
  }
  return norm;
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2,
               double eps) {
  for (const auto& [name, p] : store.params()) {
    if (!store.grad(name).all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + name + "'");
    }
  }

  const long t = store.step_count() + 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& [name, p] : store.mutable_params()) {
    const Tensor& g = store.grad(name);
    Tensor& m = store.adam_m(name);
    Tensor& v = store.adam_v(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  store.set_step_count(t);
  store.zero_grads();
}

double AnnealState::observe(double dev_bleu) {
  if (dev_bleu > best_) {
    best_ = dev_bleu;
    bad_evals_ = 0;
    improved_last_ = true;
  } else {
    improved_last_ = false;
    if (++bad_evals_ >= patience_) {
      lr_ = std::max(kFloor, lr_ * factor_);
      bad_evals_ = 0;
    }
  }
  return lr_;
}

}  // namespace searnn
