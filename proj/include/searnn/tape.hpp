#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "searnn/param_store.hpp"
#include "searnn/tensor.hpp"

namespace searnn {

// Define-by-run reverse-mode tape. Operations append nodes in execution
// order, which is a topological order, so one reverse sweep visits every node
// after all of its consumers. A tape and the ParamStore it reads are confined
// to a single training thread.
class Tape {
 public:
  using ValueId = std::uint32_t;

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  ValueId constant(Tensor v);
  // One cached leaf per parameter name; its gradient flows back to the store
  // via accumulate_param_grads().
  ValueId param(const ParamStore& store, const std::string& name);

  // [m x k] * [k x n] -> [m x n]
  ValueId matmul(ValueId a, ValueId b);
  // [m x k] * [k] -> [m]
  ValueId matvec(ValueId w, ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b) { return add(a, scale(b, -1.0)); }
  ValueId mul(ValueId a, ValueId b);  // elementwise
  ValueId scale(ValueId a, double c);
  ValueId sigmoid(ValueId x);
  ValueId tanh(ValueId x);
  ValueId concat(ValueId a, ValueId b);           // rank-1 pieces
  ValueId row_select(ValueId embedding, TokenId row);
  ValueId gather(ValueId x, std::vector<std::size_t> indices);
  ValueId log_softmax(ValueId x);                 // rank-1
  ValueId pick(ValueId x, std::size_t index);     // rank-1 -> scalar
  ValueId dot_const(ValueId x, Tensor weights);   // rank-1 -> scalar
  ValueId sum(ValueId x);                         // -> scalar
  ValueId mean_scalars(const std::vector<ValueId>& xs);
  // Elementwise op with a caller-supplied derivative rule. Exists for
  // experimentation and for negative-control tests of the checker.
  ValueId custom_unary(ValueId x, std::function<double(double)> fn,
                       std::function<double(double)> dfn);

  const Tensor& value(ValueId id) const { return nodes_[id].value; }
  const Tensor& grad(ValueId id) const { return nodes_[id].grad; }
  double scalar_value(ValueId id) const;

  // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. loss must be scalar.
  void backward(ValueId loss);
  // Adds every parameter leaf's gradient into the store's gradient buffers.
  void accumulate_param_grads(ParamStore& store) const;

  std::size_t node_count() const { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, ValueId)> backprop;  // null for leaves
    std::string param_name;                        // nonempty for param leaves
  };

  ValueId push(Tensor value, std::function<void(Tape&, ValueId)> backprop,
               const char* op_name);
  Tensor& grad_buf(ValueId id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, ValueId> param_leaves_;
  bool check_finite_;
};

}  // namespace searnn
