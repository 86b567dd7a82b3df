#pragma once

#include <map>
#include <string>

#include "searnn/tensor.hpp"

namespace searnn {

// Named parameter tensors with parallel gradient buffers and Adam moment
// state. The four maps always share one key set and per-key shapes.
class ParamStore {
 public:
  void add(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  Tensor& param(const std::string& name) { return params_.at(name); }
  const Tensor& param(const std::string& name) const { return params_.at(name); }
  Tensor& grad(const std::string& name) { return grads_.at(name); }
  const Tensor& grad(const std::string& name) const { return grads_.at(name); }
  Tensor& adam_m(const std::string& name) { return adam_m_.at(name); }
  Tensor& adam_v(const std::string& name) { return adam_v_.at(name); }

  // Name-ordered; deterministic iteration keeps reports and updates stable.
  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, Tensor>& mutable_params() { return params_; }
  std::map<std::string, Tensor>& mutable_grads() { return grads_; }

  void zero_grads();
  long step_count() const { return step_count_; }
  void set_step_count(long c) { step_count_ = c; }

  std::size_t total_elements() const;

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> grads_;
  std::map<std::string, Tensor> adam_m_;
  std::map<std::string, Tensor> adam_v_;
  long step_count_ = 0;
};

// Fills every parameter with uniform(-0.08, 0.08) draws from one seeded
// stream, in name order.
void init_uniform(ParamStore& store, std::uint64_t seed, double half_range = 0.08);

}  // namespace searnn
