#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vague/tensor.hpp"

namespace vague::nn {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode computation graph.
//
// Leaves (no backprop closure) are parameters or constants; interior nodes
// remember their operands and how to push a gradient back into them.
// Gradient buffers of leaves accumulate across backward() calls until
// explicitly zeroed; interior gradients are scratch space reset per call.
class Node {
  public:
    Tensor value;
    Tensor grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;

    bool is_leaf() const { return !backprop; }
    void ensure_grad();
    void zero_grad();
};

// Cheap value-semantics handle to a graph node.
class Var {
  public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad() { node_->zero_grad(); }
    const NodePtr& node() const { return node_; }

  private:
    NodePtr node_;
};

// Leaf constructors.
Var constant(Tensor value);
Var parameter(Tensor value); // requires_grad = true
Var detach(const Var& v);    // constant copy of v's current value

void set_requires_grad(const std::vector<Var>& vars, bool on);
void zero_grads(const std::vector<Var>& vars);

// ---- differentiable ops ------------------------------------------------
// All ops validate operand shapes (ShapeError) and, where an op can produce
// non-finite values from finite inputs, check their output (DivergenceError).

Var add(const Var& a, const Var& b);       // same shape
Var sub(const Var& a, const Var& b);       // same shape
Var mul(const Var& a, const Var& b);       // elementwise, same shape
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);    // (m,k)x(k,n), (m,k)x(k,), (k,)x(k,n)
Var dot(const Var& a, const Var& b);       // (n,)·(n,) -> scalar
Var concat(const std::vector<Var>& parts); // 1-D concatenation
Var slice(const Var& a, std::size_t offset, std::size_t len); // 1-D
Var stack_rows(const std::vector<Var>& rows);                 // T x (d,) -> (T,d)
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var softmax(const Var& a, double tau = 1.0); // last axis; tau > 0
Var log_softmax(const Var& a);               // last axis
Var max_over_rows(const Var& m, std::size_t row_limit); // (R,F) -> (F,), max over first row_limit rows
Var embedding_row(const Var& table, std::size_t id);    // (V,d) -> (d,)
Var embedding_rows(const Var& table, const std::vector<std::size_t>& ids); // -> (T,d)
// input (L,d), filters (F, width*d), bias (F,) -> (L-width+1, F)
Var conv1d_valid(const Var& input, const Var& filters, const Var& bias, std::size_t width);
Var cross_entropy(const Var& logits, std::size_t target); // -log softmax(logits)[target], scalar
// Weighted mean of per-element binary cross-entropy on logits; numerically
// stable for large |logit|. targets in {0,1}; weights >= 0 with positive sum.
Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights);
Var mean(const Var& a);
Var sum(const Var& a);
Var pick(const Var& a, std::size_t index); // 1-D -> scalar

// Reverse-mode sweep from a scalar loss. Interior gradients are reset per
// call; leaf gradients accumulate (two calls on the same graph double them).
void backward(const Var& loss);

// Central-difference gradient verification.
//
// f must rebuild the loss graph from the current parameter values and be
// deterministic (two calls with unchanged parameters must produce the same
// loss, else UsageError). Returns the maximum relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all
// parameter elements.
double grad_check(const std::function<Var()>& f, const std::vector<Var>& params,
                  double eps = 1e-5);

} // namespace vague::nn
