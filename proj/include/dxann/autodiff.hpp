#ifndef DXANN_AUTODIFF_HPP
#define DXANN_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dxann/tensor.hpp"

namespace dxann {

struct Node;
using Expr = std::shared_ptr<Node>;

// One node of a dynamically recorded expression graph. Gradients flow
// backward from a scalar root into every requires_grad leaf.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Expr> inputs;
    std::function<void(Node&)> backward;

    explicit Node(Tensor v, bool rg = false)
        : value(std::move(v)), requires_grad(rg) {
        if (rg) grad = Tensor(value.shape());
    }

    // grad buffers exist only on the differentiated subgraph
    void alloc_grad() {
        if (!grad.same_shape(value)) grad = Tensor(value.shape());
    }
};

Expr constant(Tensor v);
Expr leaf(Tensor v);  // requires_grad leaf

// Elementwise binary ops. Identical shapes, or one side scalar.
Expr add(const Expr& a, const Expr& b);
Expr sub(const Expr& a, const Expr& b);
Expr mul(const Expr& a, const Expr& b);

// Elementwise unary ops.
Expr neg(const Expr& a);
Expr tanh_(const Expr& a);
Expr exp_(const Expr& a);
Expr log_(const Expr& a);  // domain error on input <= 0
Expr square(const Expr& a);

Expr matmul(const Expr& a, const Expr& b);           // [m,k] x [k,n]
Expr matvec(const Expr& w, const Expr& x);           // [m,n] x [n] -> [m]

// "Same" cross-correlation, stride 1, odd kernel dims.
// input [Cin,H,W], kernels [Cout,Cin,kH,kW], bias [Cout] -> [Cout,H,W]
Expr conv2d(const Expr& input, const Expr& kernels, const Expr& bias);

// Sum over the named axes; all axes when empty (result is a scalar).
Expr reduce_sum(const Expr& a, const std::vector<std::size_t>& axes = {});

Expr slice(const Expr& a, std::size_t start, std::size_t len);  // flat 1-D slice
Expr reshape(const Expr& a, std::vector<std::size_t> shape);

// A named learnable tensor. Lives as a graph leaf so gradients accumulate
// into it across backward passes until zero_grad.
class Parameter {
public:
    Parameter(std::string id, Tensor value)
        : id_(std::move(id)), node_(leaf(std::move(value))) {}

    const std::string& id() const { return id_; }
    Tensor& value() { return node_->value; }
    const Tensor& value() const { return node_->value; }
    Tensor& gradient() { return node_->grad; }
    const Tensor& gradient() const { return node_->grad; }
    const Expr& expr() const { return node_; }
    void zero_grad() { node_->grad.fill(0.0); }

private:
    std::string id_;
    Expr node_;
};

// Reverse-mode accumulation of d(loss)/d(leaf) into every requires_grad
// leaf reachable from loss. Repeated calls add; callers zero between steps.
void gradient(const Expr& loss);

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace dxann

#endif
