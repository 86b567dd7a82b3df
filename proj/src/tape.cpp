#include "searnn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace searnn {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw NumericError(msg);
}

}  // namespace

Tape::ValueId Tape::push(Tensor value,
                         std::function<void(Tape&, ValueId)> backprop,
                         const char* op_name) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string("non-finite output from op '") + op_name +
                       "'");
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backprop), {}});
  return static_cast<ValueId>(nodes_.size() - 1);
}

Tape::ValueId Tape::constant(Tensor v) {
  return push(std::move(v), nullptr, "constant");
}

Tape::ValueId Tape::param(const ParamStore& store, const std::string& name) {
  auto it = param_leaves_.find(name);
  if (it != param_leaves_.end()) return it->second;
  ValueId id = push(store.param(name), nullptr, "param");
  nodes_[id].param_name = name;
  param_leaves_.emplace(name, id);
  return id;
}

Tape::ValueId Tape::matmul(ValueId a, ValueId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(),
          "matmul shape mismatch: " + A.shape_str() + " x " + B.shape_str());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A.at(i, p) * B.at(p, j);
      out.at(i, j) = acc;
    }
  }
  auto back = [a, b, m, k, n](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * B.at(p, j);
        ga.at(i, p) += acc;
      }
    }
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += A.at(i, p) * g.at(i, j);
        gb.at(p, j) += acc;
      }
    }
  };
  return push(std::move(out), back, "matmul");
}

Tape::ValueId Tape::matvec(ValueId w, ValueId x) {
  const Tensor& W = value(w);
  const Tensor& X = value(x);
  require(W.rank() == 2 && X.rank() == 1 && W.cols() == X.size(),
          "matvec shape mismatch: " + W.shape_str() + " x " + X.shape_str());
  const std::size_t m = W.rows(), k = W.cols();
  Tensor out = Tensor::vector(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = W.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) acc += row[p] * X[p];
    out[i] = acc;
  }
  auto back = [w, x, m, k](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& W = t.value(w);
    const Tensor& X = t.value(x);
    Tensor& gw = t.grad_buf(w);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = g[i];
      double* gw_row = gw.data() + i * k;
      const double* w_row = W.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        gw_row[p] += gi * X[p];
        gx[p] += gi * w_row[p];
      }
    }
  };
  return push(std::move(out), back, "matvec");
}

Tape::ValueId Tape::add(ValueId a, ValueId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.same_shape(B),
          "add shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  auto back = [a, b](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  };
  return push(std::move(out), back, "add");
}

Tape::ValueId Tape::mul(ValueId a, ValueId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.same_shape(B),
          "mul shape mismatch: " + A.shape_str() + " vs " + B.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  auto back = [a, b](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * B[i];
      gb[i] += g[i] * A[i];
    }
  };
  return push(std::move(out), back, "mul");
}

Tape::ValueId Tape::scale(ValueId a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  auto back = [a, c](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buf(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  };
  return push(std::move(out), back, "scale");
}

Tape::ValueId Tape::sigmoid(ValueId x) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  }
  auto back = [x](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  };
  return push(std::move(out), back, "sigmoid");
}

Tape::ValueId Tape::tanh(ValueId x) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  auto back = [x](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * (1.0 - y[i] * y[i]);
    }
  };
  return push(std::move(out), back, "tanh");
}

Tape::ValueId Tape::concat(ValueId a, ValueId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rank() == 1 && B.rank() == 1, "concat expects rank-1 inputs");
  Tensor out = Tensor::vector(A.size() + B.size());
  std::copy(A.data(), A.data() + A.size(), out.data());
  std::copy(B.data(), B.data() + B.size(), out.data() + A.size());
  const std::size_t split = A.size();
  auto back = [a, b, split](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    for (std::size_t i = split; i < g.size(); ++i) gb[i - split] += g[i];
  };
  return push(std::move(out), back, "concat");
}

Tape::ValueId Tape::row_select(ValueId embedding, TokenId row) {
  const Tensor& E = value(embedding);
  require(E.rank() == 2, "row_select expects a matrix");
  require(row >= 0 && static_cast<std::size_t>(row) < E.rows(),
          "row_select index " + std::to_string(row) + " out of range for " +
              E.shape_str());
  const std::size_t d = E.cols();
  Tensor out = Tensor::vector(d);
  std::copy(E.data() + static_cast<std::size_t>(row) * d,
            E.data() + (static_cast<std::size_t>(row) + 1) * d, out.data());
  auto back = [embedding, row, d](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    Tensor& ge = t.grad_buf(embedding);
    double* dst = ge.data() + static_cast<std::size_t>(row) * d;
    for (std::size_t i = 0; i < d; ++i) dst[i] += g[i];
  };
  return push(std::move(out), back, "row_select");
}

Tape::ValueId Tape::gather(ValueId x, std::vector<std::size_t> indices) {
  const Tensor& X = value(x);
  require(X.rank() == 1, "gather expects rank-1 input");
  Tensor out = Tensor::vector(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < X.size(), "gather index out of range");
    out[i] = X[indices[i]];
  }
  auto back = [x, indices = std::move(indices)](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < indices.size(); ++i) gx[indices[i]] += g[i];
  };
  return push(std::move(out), back, "gather");
}

Tape::ValueId Tape::log_softmax(ValueId x) {
  const Tensor& X = value(x);
  require(X.rank() == 1 && X.size() > 0, "log_softmax expects nonempty vector");
  double max = X[0];
  for (std::size_t i = 1; i < X.size(); ++i) max = std::max(max, X[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) sum += std::exp(X[i] - max);
  const double log_z = max + std::log(sum);
  Tensor out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= log_z;
  auto back = [x](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buf(x);
    double g_total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) g_total += g[i];
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] - std::exp(y[i]) * g_total;
    }
  };
  return push(std::move(out), back, "log_softmax");
}

Tape::ValueId Tape::pick(ValueId x, std::size_t index) {
  const Tensor& X = value(x);
  require(X.rank() == 1 && index < X.size(), "pick index out of range");
  auto back = [x, index](Tape& t, ValueId self) {
    t.grad_buf(x)[index] += t.grad(self)[0];
  };
  return push(Tensor::scalar(X[index]), back, "pick");
}

Tape::ValueId Tape::dot_const(ValueId x, Tensor weights) {
  const Tensor& X = value(x);
  require(X.rank() == 1 && X.same_shape(weights),
          "dot_const shape mismatch: " + X.shape_str() + " vs " +
              weights.shape_str());
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += X[i] * weights[i];
  auto back = [x, w = std::move(weights)](Tape& t, ValueId self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
  };
  return push(Tensor::scalar(acc), back, "dot_const");
}

Tape::ValueId Tape::sum(ValueId x) {
  const Tensor& X = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) acc += X[i];
  auto back = [x](Tape& t, ValueId self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  };
  return push(Tensor::scalar(acc), back, "sum");
}

Tape::ValueId Tape::mean_scalars(const std::vector<ValueId>& xs) {
  require(!xs.empty(), "mean_scalars over empty list");
  double acc = 0.0;
  for (ValueId id : xs) {
    require(value(id).size() == 1, "mean_scalars expects scalar inputs");
    acc += value(id)[0];
  }
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  auto back = [xs, inv_n](Tape& t, ValueId self) {
    const double g = t.grad(self)[0] * inv_n;
    for (ValueId id : xs) t.grad_buf(id)[0] += g;
  };
  return push(Tensor::scalar(acc * inv_n), back, "mean_scalars");
}

Tape::ValueId Tape::custom_unary(ValueId x, std::function<double(double)> fn,
                                 std::function<double(double)> dfn) {
  Tensor out = value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(out[i]);
  auto back = [x, dfn = std::move(dfn)](Tape& t, ValueId self) {
    const Tensor& g = t.grad(self);
    const Tensor& in = t.value(x);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfn(in[i]);
  };
  return push(std::move(out), back, "custom_unary");
}

double Tape::scalar_value(ValueId id) const {
  const Tensor& v = value(id);
  require(v.size() == 1, "expected scalar node");
  return v[0];
}

void Tape::backward(ValueId loss) {
  require(value(loss).size() == 1, "backward requires a scalar loss");
  for (auto& node : nodes_) {
    node.grad = Tensor(node.value.shape());
  }
  nodes_[loss].grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].backprop) {
      nodes_[i].backprop(*this, static_cast<ValueId>(i));
    }
  }
  if (check_finite_) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].grad.all_finite()) {
        throw NumericError("non-finite gradient in backward sweep at node " +
                           std::to_string(i));
      }
    }
  }
}

void Tape::accumulate_param_grads(ParamStore& store) const {
  for (const auto& [name, id] : param_leaves_) {
    const Tensor& g = nodes_[id].grad;
    if (g.size() == 0) continue;  // backward not run
    Tensor& dst = store.grad(name);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

void Tape::reset() {
  nodes_.clear();
  param_leaves_.clear();
}

}  // namespace searnn
