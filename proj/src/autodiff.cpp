#include "dxann/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace dxann {

Expr constant(Tensor v) { return std::make_shared<Node>(std::move(v), false); }
Expr leaf(Tensor v) { return std::make_shared<Node>(std::move(v), true); }

namespace {

Expr make_op(Tensor value, std::vector<Expr> inputs,
             std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>(std::move(value));
    for (const auto& in : inputs)
        if (in->requires_grad) n->requires_grad = true;
    n->inputs = std::move(inputs);
    if (n->requires_grad) {
        n->alloc_grad();
        n->backward = std::move(backward);
    }
    return n;
}

// Accumulate g into the gradient of `dst`, summing when dst is a scalar
// that was broadcast against a larger operand.
void accum(Node& dst, const Tensor& g) {
    if (dst.grad.size() == g.size()) {
        for (std::size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
        dst.grad[0] += s;
    }
}

void check_binary_shapes(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b) && a.size() != 1 && b.size() != 1)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

double bval(const Tensor& t, std::size_t i) { return t.size() == 1 ? t[0] : t[i]; }

Expr binary(const Expr& a, const Expr& b, const char* name,
            double (*f)(double, double),
            // df w.r.t. each operand, given both operand values
            double (*dfa)(double, double), double (*dfb)(double, double)) {
    check_binary_shapes(a->value, b->value, name);
    const Tensor& big = a->value.size() >= b->value.size() ? a->value : b->value;
    Tensor out(big.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(bval(a->value, i), bval(b->value, i));
    return make_op(std::move(out), {a, b}, [dfa, dfb](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        Tensor ga(self.grad.shape()), gb(self.grad.shape());
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double x = bval(na.value, i), y = bval(nb.value, i), g = self.grad[i];
            ga[i] = g * dfa(x, y);
            gb[i] = g * dfb(x, y);
        }
        if (na.requires_grad) accum(na, ga);
        if (nb.requires_grad) accum(nb, gb);
    });
}

Expr unary(const Expr& a, double (*f)(double), double (*df)(double, double)) {
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i]);
    return make_op(std::move(out), {a}, [df](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            na.grad[i] += self.grad[i] * df(na.value[i], self.value[i]);
    });
}

}  // namespace

Expr add(const Expr& a, const Expr& b) {
    return binary(a, b, "add",
                  [](double x, double y) { return x + y; },
                  [](double, double) { return 1.0; },
                  [](double, double) { return 1.0; });
}

Expr sub(const Expr& a, const Expr& b) {
    return binary(a, b, "sub",
                  [](double x, double y) { return x - y; },
                  [](double, double) { return 1.0; },
                  [](double, double) { return -1.0; });
}

Expr mul(const Expr& a, const Expr& b) {
    return binary(a, b, "mul",
                  [](double x, double y) { return x * y; },
                  [](double, double y) { return y; },
                  [](double x, double) { return x; });
}

Expr neg(const Expr& a) {
    return unary(a, [](double x) { return -x; },
                 [](double, double) { return -1.0; });
}

Expr tanh_(const Expr& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Expr exp_(const Expr& a) {
    return unary(a, [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}

Expr log_(const Expr& a) {
    for (std::size_t i = 0; i < a->value.size(); ++i)
        if (!(a->value[i] > 0.0))
            throw std::domain_error("log: input element " + std::to_string(i) +
                                    " is " + std::to_string(a->value[i]) +
                                    " (must be > 0)");
    return unary(a, [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Expr square(const Expr& a) {
    return unary(a, [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Expr matmul(const Expr& a, const Expr& b) {
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " +
                                    A.shape_str() + " and " + B.shape_str());
    std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                out[i * n + j] += av * B[p * n + j];
        }
    return make_op(std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const Tensor& g = self.grad;
        if (na.requires_grad) {  // dA = g . B^T
            const Tensor& B = nb.value;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        s += g[i * n + j] * B[p * n + j];
                    na.grad[i * k + p] += s;
                }
        }
        if (nb.requires_grad) {  // dB = A^T . g
            const Tensor& A = na.value;
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i) {
                    double av = A[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        nb.grad[p * n + j] += av * g[i * n + j];
                }
        }
    });
}

Expr matvec(const Expr& w, const Expr& x) {
    const Tensor& W = w->value;
    const Tensor& X = x->value;
    if (W.rank() != 2 || X.rank() != 1 || W.dim(1) != X.dim(0))
        throw std::invalid_argument("matvec: incompatible shapes " +
                                    W.shape_str() + " and " + X.shape_str());
    std::size_t m = W.dim(0), n = W.dim(1);
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += W[i * n + j] * X[j];
        out[i] = s;
    }
    return make_op(std::move(out), {w, x}, [m, n](Node& self) {
        Node& nw = *self.inputs[0];
        Node& nx = *self.inputs[1];
        const Tensor& g = self.grad;
        if (nw.requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    nw.grad[i * n + j] += g[i] * nx.value[j];
        if (nx.requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    nx.grad[j] += g[i] * nw.value[i * n + j];
    });
}

Expr conv2d(const Expr& input, const Expr& kernels, const Expr& bias) {
    const Tensor& X = input->value;
    const Tensor& K = kernels->value;
    const Tensor& B = bias->value;
    if (X.rank() != 3 || K.rank() != 4 || B.rank() != 1)
        throw std::invalid_argument("conv2d: expected input [Cin,H,W], kernels "
                                    "[Cout,Cin,kH,kW], bias [Cout]; got " +
                                    X.shape_str() + ", " + K.shape_str() + ", " +
                                    B.shape_str());
    std::size_t cin = X.dim(0), h = X.dim(1), w = X.dim(2);
    std::size_t cout = K.dim(0), kh = K.dim(2), kw = K.dim(3);
    if (K.dim(1) != cin)
        throw std::invalid_argument("conv2d: kernel Cin " + std::to_string(K.dim(1)) +
                                    " != input Cin " + std::to_string(cin));
    if (B.dim(0) != cout)
        throw std::invalid_argument("conv2d: bias length mismatch");
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("conv2d: even kernel dims unsupported (got " +
                                    std::to_string(kh) + "x" + std::to_string(kw) + ")");
    std::ptrdiff_t ph = kh / 2, pw = kw / 2;
    Tensor out({cout, h, w});
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                double s = B[co];
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t u = 0; u < kh; ++u) {
                        std::ptrdiff_t ii = std::ptrdiff_t(i) + std::ptrdiff_t(u) - ph;
                        if (ii < 0 || ii >= std::ptrdiff_t(h)) continue;
                        for (std::size_t v = 0; v < kw; ++v) {
                            std::ptrdiff_t jj = std::ptrdiff_t(j) + std::ptrdiff_t(v) - pw;
                            if (jj < 0 || jj >= std::ptrdiff_t(w)) continue;
                            s += X[(ci * h + ii) * w + jj] *
                                 K[((co * cin + ci) * kh + u) * kw + v];
                        }
                    }
                out[(co * h + i) * w + j] = s;
            }
    return make_op(std::move(out), {input, kernels, bias},
                   [cin, cout, h, w, kh, kw, ph, pw](Node& self) {
        Node& nx = *self.inputs[0];
        Node& nk = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const Tensor& g = self.grad;
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    double go = g[(co * h + i) * w + j];
                    if (nb.requires_grad) nb.grad[co] += go;
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t u = 0; u < kh; ++u) {
                            std::ptrdiff_t ii = std::ptrdiff_t(i) + std::ptrdiff_t(u) - ph;
                            if (ii < 0 || ii >= std::ptrdiff_t(h)) continue;
                            for (std::size_t v = 0; v < kw; ++v) {
                                std::ptrdiff_t jj = std::ptrdiff_t(j) + std::ptrdiff_t(v) - pw;
                                if (jj < 0 || jj >= std::ptrdiff_t(w)) continue;
                                std::size_t xi = (ci * h + ii) * w + jj;
                                std::size_t ki = ((co * cin + ci) * kh + u) * kw + v;
                                if (nx.requires_grad)
                                    nx.grad[xi] += go * nk.value[ki];
                                if (nk.requires_grad)
                                    nk.grad[ki] += go * nx.value[xi];
                            }
                        }
                }
    });
}

Expr reduce_sum(const Expr& a, const std::vector<std::size_t>& axes) {
    const Tensor& A = a->value;
    for (std::size_t ax : axes)
        if (ax >= A.rank())
            throw std::invalid_argument("reduce_sum: axis " + std::to_string(ax) +
                                        " out of range for shape " + A.shape_str());
    std::vector<bool> reduced(A.rank(), axes.empty());
    for (std::size_t ax : axes) reduced[ax] = true;
    std::vector<std::size_t> out_shape;
    for (std::size_t d = 0; d < A.rank(); ++d)
        if (!reduced[d]) out_shape.push_back(A.dim(d));

    // Map each flat input index to its flat output index, sequentially.
    std::vector<std::size_t> out_strides(A.rank(), 0);
    {
        std::size_t stride = 1;
        for (std::size_t d = A.rank(); d-- > 0;) {
            if (!reduced[d]) {
                out_strides[d] = stride;
                stride *= A.dim(d);
            }
        }
    }
    auto out_index = [dims = A.shape(), out_strides](std::size_t flat) {
        std::size_t oi = 0;
        for (std::size_t d = dims.size(); d-- > 0;) {
            std::size_t c = flat % dims[d];
            flat /= dims[d];
            oi += c * out_strides[d];
        }
        return oi;
    };

    Tensor out(out_shape);
    for (std::size_t i = 0; i < A.size(); ++i) out[out_index(i)] += A[i];
    return make_op(std::move(out), {a}, [out_index](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        for (std::size_t i = 0; i < na.value.size(); ++i)
            na.grad[i] += self.grad[out_index(i)];
    });
}

Expr slice(const Expr& a, std::size_t start, std::size_t len) {
    const Tensor& A = a->value;
    if (start + len > A.size())
        throw std::invalid_argument("slice: [" + std::to_string(start) + "," +
                                    std::to_string(start + len) +
                                    ") out of range for size " +
                                    std::to_string(A.size()));
    Tensor out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = A[start + i];
    return make_op(std::move(out), {a}, [start, len](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        for (std::size_t i = 0; i < len; ++i)
            na.grad[start + i] += self.grad[i];
    });
}

Expr reshape(const Expr& a, std::vector<std::size_t> shape) {
    if (Tensor::count(shape) != a->value.size())
        throw std::invalid_argument("reshape: cannot view size " +
                                    std::to_string(a->value.size()) + " as " +
                                    Tensor(shape).shape_str());
    Tensor out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i];
    return make_op(std::move(out), {a}, [](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            na.grad[i] += self.grad[i];
    });
}

void gradient(const Expr& loss) {
    if (loss->value.size() != 1)
        throw std::invalid_argument("gradient: loss must be scalar, got shape " +
                                    loss->value.shape_str());
    // Iterative post-order topological sort over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    if (loss->requires_grad) stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    if (order.empty()) return;  // constant loss: nothing to accumulate
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward) (*it)->backward(**it);
    // Intermediate grads are scratch per pass; leaves keep accumulating.
    for (Node* n : order)
        if (n->backward) n->grad.fill(0.0);
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

}  // namespace dxann
