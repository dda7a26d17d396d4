#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lpsd/forward_model.hpp"

// Minimal reverse-mode tape. Tensors are shared handles onto value/grad
// buffers; each op computes its result eagerly, verifies it is finite, and
// (in grad mode) records a closure that routes the output gradient to its
// parents. backward() runs the closures in reverse topological order and
// frees the tape as it goes: one backward per forward, gradients accumulate
// additively on leaf tensors until zero_grad().
//
// Layout: rank-3 tensors are (batch, channels, time) for single-trace work,
// rank-4 are (batch, channels, time, traces); last dimension fastest.

namespace lpsd::nn {

struct Shape {
    std::array<std::int64_t, 4> d{1, 1, 1, 1};
    int rank = 0;

    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims);

    std::int64_t operator[](int i) const { return d[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const;
    // Spatial element count: product of dims after (batch, channels).
    std::int64_t spatial() const;
    bool operator==(const Shape& o) const;
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    bool requires_grad = false; // leaf parameter
    bool on_tape = false;       // gradient must flow through
    bool consumed = false;      // backward already ran over this node
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<double>& grad_buf();
};

} // namespace detail

bool grad_enabled();

// Disables tape recording in a scope (inference, finite-difference probes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value, bool requires_grad = false);
    static Tensor from(const Shape& s, std::vector<double> values,
                       bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const { return shape().numel(); }

    double* data();
    const double* data() const;
    const std::vector<double>& values() const;
    double item() const; // scalar tensors only

    bool requires_grad() const;
    bool on_tape() const;

    // Gradient of the last backward pass(es); materializes zeros for a leaf
    // that no tape ever touched. Throws lpsd::StateError on non-leaf tensors.
    const std::vector<double>& grad() const;
    bool grad_materialized() const;
    void zero_grad();

    std::shared_ptr<detail::Node> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> node_;
};

// Seeds d(loss)/d(loss) = 1 and propagates to every leaf with
// requires_grad. The tape is freed as it is consumed; a second backward over
// the same graph throws lpsd::StateError.
void backward(const Tensor& loss);

// Elementwise arithmetic (shapes must match).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double alpha);

// Broadcast multiply by a one-element tensor (the trainable step size).
Tensor mul_scalar(const Tensor& scalar, const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Mean of squared differences over all elements; scalar output.
Tensor mse_loss(const Tensor& a, const Tensor& b);

// Concatenate along the channel dimension; all other dims must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Physics operator on the tape, applied along the time axis of every
// (batch, channel[, trace]) fiber. Linear, so the backward pass is the
// transposed operator.
Tensor operator_apply(const ConvOperator& op, const Tensor& x);
Tensor operator_apply_adjoint(const ConvOperator& op, const Tensor& y);

namespace detail {

// Finishes an op: verifies the value is finite, wraps it in a node, and
// attaches the backward closure when grad mode is on and a parent is on the
// tape. Building block for the layer implementations.
Tensor make_op_result(const char* op, const Shape& s,
                      std::vector<double> value,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backward);

} // namespace detail

} // namespace lpsd::nn
