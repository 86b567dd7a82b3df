#include "searnn/param_store.hpp"

namespace searnn {

void ParamStore::add(const std::string& name, Tensor init) {
  if (has(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor zeros(init.shape());
  grads_.emplace(name, zeros);
  adam_m_.emplace(name, zeros);
  adam_v_.emplace(name, zeros);
  params_.emplace(name, std::move(init));
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.fill(0.0);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.size();
  return n;
}

void init_uniform(ParamStore& store, std::uint64_t seed, double half_range) {
  SplitMix64 rng(seed);
  for (auto& [name, p] : store.mutable_params()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.uniform(-half_range, half_range);
    }
  }
}

}  // namespace searnn
