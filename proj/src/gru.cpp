#include "searnn/gru.hpp"

#include <cmath>

namespace searnn {

namespace {

// acc = W x + U h + b, evaluated left to right per element.
std::vector<double> gate_preactivation(const Tensor& W, const Tensor& U,
                                       const Tensor& b,
                                       const std::vector<double>& x,
                                       const std::vector<double>& h) {
  const std::size_t hidden = W.rows();
  const std::size_t in = W.cols();
  if (in != x.size() || U.cols() != h.size() || U.rows() != hidden ||
      b.size() != hidden) {
    throw NumericError("gru gate shape mismatch");
  }
  std::vector<double> wx(hidden), uh(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    double acc = 0.0;
    const double* row = W.data() + i * in;
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    wx[i] = acc;
  }
  for (std::size_t i = 0; i < hidden; ++i) {
    double acc = 0.0;
    const double* row = U.data() + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) acc += row[j] * h[j];
    uh[i] = acc;
  }
  std::vector<double> out(hidden);
  for (std::size_t i = 0; i < hidden; ++i) out[i] = (wx[i] + uh[i]) + b[i];
  return out;
}

}  // namespace

GruParams GruParams::view(const ParamStore& store, const std::string& prefix) {
  return GruParams{
      &store.param(prefix + ".Wz"), &store.param(prefix + ".Uz"),
      &store.param(prefix + ".bz"), &store.param(prefix + ".Wr"),
      &store.param(prefix + ".Ur"), &store.param(prefix + ".br"),
      &store.param(prefix + ".Wh"), &store.param(prefix + ".Uh"),
      &store.param(prefix + ".bh")};
}

void add_gru_params(ParamStore& store, const std::string& prefix,
                    std::size_t input_dim, std::size_t hidden_dim) {
  for (const char* gate : {"z", "r", "h"}) {
    store.add(prefix + ".W" + gate, Tensor::matrix(hidden_dim, input_dim));
    store.add(prefix + ".U" + gate, Tensor::matrix(hidden_dim, hidden_dim));
    store.add(prefix + ".b" + gate, Tensor::vector(hidden_dim));
  }
}

std::vector<double> gru_step(const GruParams& g, const std::vector<double>& x,
                             const std::vector<double>& h_prev) {
  const std::size_t hidden = g.Wz->rows();
  std::vector<double> z = gate_preactivation(*g.Wz, *g.Uz, *g.bz, x, h_prev);
  std::vector<double> r = gate_preactivation(*g.Wr, *g.Ur, *g.br, x, h_prev);
  for (std::size_t i = 0; i < hidden; ++i) {
    z[i] = 1.0 / (1.0 + std::exp(-z[i]));
    r[i] = 1.0 / (1.0 + std::exp(-r[i]));
  }
  std::vector<double> rh(hidden);
  for (std::size_t i = 0; i < hidden; ++i) rh[i] = r[i] * h_prev[i];
  std::vector<double> hc = gate_preactivation(*g.Wh, *g.Uh, *g.bh, x, rh);
  std::vector<double> h_new(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    hc[i] = std::tanh(hc[i]);
    h_new[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hc[i];
  }
  return h_new;
}

Tape::ValueId gru_step_on_tape(Tape& tape, const ParamStore& store,
                               const std::string& prefix, Tape::ValueId x,
                               Tape::ValueId h_prev) {
  auto p = [&](const char* suffix) {
    return tape.param(store, prefix + suffix);
  };
  auto gate = [&](const char* w, const char* u, const char* b,
                  Tape::ValueId hx) {
    return tape.add(tape.add(tape.matvec(p(w), x), tape.matvec(p(u), hx)),
                    p(b));
  };
  Tape::ValueId z = tape.sigmoid(gate(".Wz", ".Uz", ".bz", h_prev));
  Tape::ValueId r = tape.sigmoid(gate(".Wr", ".Ur", ".br", h_prev));
  Tape::ValueId rh = tape.mul(r, h_prev);
  Tape::ValueId hc = tape.tanh(gate(".Wh", ".Uh", ".bh", rh));
  const std::size_t hidden = tape.value(h_prev).size();
  Tape::ValueId ones = tape.constant(
      Tensor({hidden}, std::vector<double>(hidden, 1.0)));
  Tape::ValueId carry = tape.mul(tape.add(ones, tape.scale(z, -1.0)), h_prev);
  return tape.add(carry, tape.mul(z, hc));
}

}  // namespace searnn
