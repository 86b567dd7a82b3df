#pragma once

#include <string>
#include <vector>

#include "searnn/tape.hpp"

namespace searnn {

// One GRU cell's parameters, looked up from a ParamStore by name prefix:
// <prefix>.Wz, .Uz, .bz, .Wr, .Ur, .br, .Wh, .Uh, .bh. W* are [hidden x in],
// U* are [hidden x hidden], b* are [hidden].
struct GruParams {
  const Tensor* Wz;
  const Tensor* Uz;
  const Tensor* bz;
  const Tensor* Wr;
  const Tensor* Ur;
  const Tensor* br;
  const Tensor* Wh;
  const Tensor* Uh;
  const Tensor* bh;

  static GruParams view(const ParamStore& store, const std::string& prefix);
};

// Registers zero-initialized GRU parameters under the prefix.
void add_gru_params(ParamStore& store, const std::string& prefix,
                    std::size_t input_dim, std::size_t hidden_dim);

// z = sigmoid(Wz x + Uz h + bz); r = sigmoid(Wr x + Ur h + br);
// hc = tanh(Wh x + Uh (r*h) + bh); h' = (1-z)*h + z*hc.
// The tape builder composes primitives in the same evaluation order, so both
// paths produce bit-identical values.
std::vector<double> gru_step(const GruParams& g, const std::vector<double>& x,
                             const std::vector<double>& h_prev);

Tape::ValueId gru_step_on_tape(Tape& tape, const ParamStore& store,
                               const std::string& prefix, Tape::ValueId x,
                               Tape::ValueId h_prev);

}  // namespace searnn
