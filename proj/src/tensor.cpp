#include "lpsd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include "lpsd/errors.hpp"
#include "lpsd/kernels.hpp"

namespace lpsd::nn {

namespace {

thread_local bool g_grad_enabled = true;

void ensure_finite(const std::vector<double>& v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + ": non-finite value produced");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape().str() + " vs " + b.shape().str());
}

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr make_leaf(const Shape& s, std::vector<double> values,
                  bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = s;
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    n->on_tape = requires_grad;
    return n;
}

} // namespace

namespace detail {

Tensor make_op_result(const char* op, const Shape& s,
                      std::vector<double> value, std::vector<NodePtr> parents,
                      std::function<void(Node&)> backward) {
    ensure_finite(value, op);
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->value = std::move(value);
    bool tape = false;
    if (g_grad_enabled)
        for (const auto& p : parents)
            if (p && p->on_tape) tape = true;
    if (tape) {
        n->on_tape = true;
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return Tensor::wrap(n);
}

} // namespace detail

namespace {

Tensor make_result(const char* op, const Shape& s, std::vector<double> value,
                   std::vector<NodePtr> parents,
                   std::function<void(detail::Node&)> backward) {
    return detail::make_op_result(op, s, std::move(value), std::move(parents),
                                  std::move(backward));
}

} // namespace

Shape::Shape(std::initializer_list<std::int64_t> dims) {
    if (dims.size() == 0 || dims.size() > 4)
        throw std::invalid_argument("Shape: rank must be 1..4");
    rank = static_cast<int>(dims.size());
    int i = 0;
    for (std::int64_t v : dims) {
        if (v < 1) throw std::invalid_argument("Shape: dims must be >= 1");
        d[static_cast<std::size_t>(i++)] = v;
    }
}

std::int64_t Shape::numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[static_cast<std::size_t>(i)];
    return n;
}

std::int64_t Shape::spatial() const {
    std::int64_t n = 1;
    for (int i = 2; i < rank; ++i) n *= d[static_cast<std::size_t>(i)];
    return n;
}

bool Shape::operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
        if (d[static_cast<std::size_t>(i)] != o.d[static_cast<std::size_t>(i)])
            return false;
    return true;
}

std::string Shape::str() const {
    std::string s = "(";
    for (int i = 0; i < rank; ++i) {
        if (i) s += ", ";
        s += std::to_string(d[static_cast<std::size_t>(i)]);
    }
    return s + ")";
}

namespace detail {

std::vector<double>& Node::grad_buf() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

} // namespace detail

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    return wrap(make_leaf(
        s, std::vector<double>(static_cast<std::size_t>(s.numel()), 0.0),
        requires_grad));
}

Tensor Tensor::full(const Shape& s, double value, bool requires_grad) {
    return wrap(make_leaf(
        s, std::vector<double>(static_cast<std::size_t>(s.numel()), value),
        requires_grad));
}

Tensor Tensor::from(const Shape& s, std::vector<double> values,
                    bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != s.numel())
        throw std::invalid_argument("Tensor::from: value count " +
                                    std::to_string(values.size()) +
                                    " does not match shape " + s.str());
    return wrap(make_leaf(s, std::move(values), requires_grad));
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

const Shape& Tensor::shape() const {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->shape;
}

double* Tensor::data() {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->value.data();
}

const double* Tensor::data() const {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->value.data();
}

const std::vector<double>& Tensor::values() const {
    if (!node_) throw StateError("Tensor: undefined");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1)
        throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::on_tape() const { return node_ && node_->on_tape; }

const std::vector<double>& Tensor::grad() const {
    if (!node_) throw StateError("Tensor: undefined");
    if (!node_->requires_grad)
        throw StateError("Tensor::grad: not a leaf parameter");
    return node_->grad_buf(); // zeros if never touched by a tape
}

bool Tensor::grad_materialized() const {
    return node_ && !node_->grad.empty();
}

void Tensor::zero_grad() {
    if (!node_) throw StateError("Tensor: undefined");
    node_->grad.assign(node_->value.size(), 0.0);
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a defined scalar");
    auto root = loss.node();
    if (!root->on_tape)
        throw StateError("backward: loss is not connected to any parameter");
    if (root->consumed)
        throw StateError("backward: tape already consumed; re-run forward");

    // Iterative DFS postorder over parents; every reachable node is an
    // ancestor of the loss, so each receives its full gradient before its
    // own closure runs (reverse postorder).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p && p->on_tape && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buf()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        node->consumed = true;
        if (node->backward) {
            node->backward(*node);
            node->backward = nullptr; // free the tape as we go
        }
        if (!node->requires_grad) {
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.values().size());
    kernels::add(a.data(), b.data(), out.data(), out.size());
    auto pa = a.node();
    auto pb = b.node();
    return make_result("add", a.shape(), std::move(out), {pa, pb},
                       [pa, pb](detail::Node& self) {
                           if (pa->on_tape)
                               kernels::axpy(1.0, self.grad.data(),
                                             pa->grad_buf().data(),
                                             self.grad.size());
                           if (pb->on_tape)
                               kernels::axpy(1.0, self.grad.data(),
                                             pb->grad_buf().data(),
                                             self.grad.size());
                       });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.values().size());
    kernels::sub(a.data(), b.data(), out.data(), out.size());
    auto pa = a.node();
    auto pb = b.node();
    return make_result("sub", a.shape(), std::move(out), {pa, pb},
                       [pa, pb](detail::Node& self) {
                           if (pa->on_tape)
                               kernels::axpy(1.0, self.grad.data(),
                                             pa->grad_buf().data(),
                                             self.grad.size());
                           if (pb->on_tape)
                               kernels::axpy(-1.0, self.grad.data(),
                                             pb->grad_buf().data(),
                                             self.grad.size());
                       });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.values().size());
    kernels::mul(a.data(), b.data(), out.data(), out.size());
    auto pa = a.node();
    auto pb = b.node();
    return make_result(
        "mul", a.shape(), std::move(out), {pa, pb},
        [pa, pb](detail::Node& self) {
            const std::size_t len = self.grad.size();
            if (pa->on_tape) {
                auto& ga = pa->grad_buf();
                for (std::size_t i = 0; i < len; ++i)
                    ga[i] += self.grad[i] * pb->value[i];
            }
            if (pb->on_tape) {
                auto& gb = pb->grad_buf();
                for (std::size_t i = 0; i < len; ++i)
                    gb[i] += self.grad[i] * pa->value[i];
            }
        });
}

Tensor scale(const Tensor& x, double alpha) {
    std::vector<double> out = x.values();
    kernels::scale(alpha, out.data(), out.size());
    auto px = x.node();
    return make_result("scale", x.shape(), std::move(out), {px},
                       [px, alpha](detail::Node& self) {
                           kernels::axpy(alpha, self.grad.data(),
                                         px->grad_buf().data(),
                                         self.grad.size());
                       });
}

Tensor mul_scalar(const Tensor& scalar, const Tensor& x) {
    if (scalar.numel() != 1)
        throw std::invalid_argument("mul_scalar: scalar tensor must have one element");
    const double s = scalar.values()[0];
    std::vector<double> out = x.values();
    kernels::scale(s, out.data(), out.size());
    auto ps = scalar.node();
    auto px = x.node();
    return make_result("mul_scalar", x.shape(), std::move(out), {ps, px},
                       [ps, px](detail::Node& self) {
                           if (ps->on_tape)
                               ps->grad_buf()[0] +=
                                   kernels::dot(self.grad.data(),
                                                px->value.data(),
                                                self.grad.size());
                           if (px->on_tape)
                               kernels::axpy(ps->value[0], self.grad.data(),
                                             px->grad_buf().data(),
                                             self.grad.size());
                       });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.values().size());
    kernels::relu(x.data(), out.data(), out.size());
    auto px = x.node();
    return make_result("relu", x.shape(), std::move(out), {px},
                       [px](detail::Node& self) {
                           kernels::relu_backward(px->value.data(),
                                                  self.grad.data(),
                                                  px->grad_buf().data(),
                                                  self.grad.size());
                       });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.values().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
    auto px = x.node();
    return make_result("sigmoid", x.shape(), std::move(out), {px},
                       [px](detail::Node& self) {
                           auto& g = px->grad_buf();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               const double s = self.value[i];
                               g[i] += self.grad[i] * s * (1.0 - s);
                           }
                       });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse_loss");
    const std::size_t len = a.values().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double d = a.values()[i] - b.values()[i];
        acc += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(len);
    auto pa = a.node();
    auto pb = b.node();
    return make_result(
        "mse_loss", Shape{1}, {acc * inv_n}, {pa, pb},
        [pa, pb, inv_n](detail::Node& self) {
            const double g0 = 2.0 * inv_n * self.grad[0];
            const std::size_t len2 = pa->value.size();
            if (pa->on_tape) {
                auto& ga = pa->grad_buf();
                for (std::size_t i = 0; i < len2; ++i)
                    ga[i] += g0 * (pa->value[i] - pb->value[i]);
            }
            if (pb->on_tape) {
                auto& gb = pb->grad_buf();
                for (std::size_t i = 0; i < len2; ++i)
                    gb[i] -= g0 * (pa->value[i] - pb->value[i]);
            }
        });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank != sb.rank || sa.rank < 3)
        throw std::invalid_argument("concat_channels: rank mismatch");
    if (sa[0] != sb[0] || sa.spatial() != sb.spatial())
        throw std::invalid_argument("concat_channels: batch/spatial mismatch " +
                                    sa.str() + " vs " + sb.str());
    Shape out_shape = sa;
    out_shape.d[1] = sa[1] + sb[1];

    const std::int64_t batch = sa[0];
    const std::int64_t sp = sa.spatial();
    const std::int64_t ca = sa[1] * sp, cb = sb[1] * sp;
    std::vector<double> out(static_cast<std::size_t>(out_shape.numel()));
    for (std::int64_t n = 0; n < batch; ++n) {
        std::memcpy(out.data() + n * (ca + cb), a.data() + n * ca,
                    static_cast<std::size_t>(ca) * sizeof(double));
        std::memcpy(out.data() + n * (ca + cb) + ca, b.data() + n * cb,
                    static_cast<std::size_t>(cb) * sizeof(double));
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_result(
        "concat_channels", out_shape, std::move(out), {pa, pb},
        [pa, pb, batch, ca, cb](detail::Node& self) {
            for (std::int64_t n = 0; n < batch; ++n) {
                const double* g = self.grad.data() + n * (ca + cb);
                if (pa->on_tape)
                    kernels::axpy(1.0, g, pa->grad_buf().data() + n * ca,
                                  static_cast<std::size_t>(ca));
                if (pb->on_tape)
                    kernels::axpy(1.0, g + ca, pb->grad_buf().data() + n * cb,
                                  static_cast<std::size_t>(cb));
            }
        });
}

namespace {

// Applies op (or its adjoint) along the time axis of every fiber of a
// (B, C, n) or (B, C, n, m) block. src and dst are distinct full-size
// buffers; dst is accumulated into when accumulate is set (backward pass).
void apply_along_time(const ConvOperator& op, bool adjoint, const Shape& s,
                      const double* src, double* dst, bool accumulate) {
    const std::int64_t planes = s[0] * s[1];
    const std::int64_t n = s[2];
    const std::int64_t m = s.rank == 4 ? s[3] : 1;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<double> out(static_cast<std::size_t>(n));
    for (std::int64_t p = 0; p < planes; ++p) {
        const double* sp = src + p * n * m;
        double* dp = dst + p * n * m;
        for (std::int64_t j = 0; j < m; ++j) {
            if (m == 1) {
                std::memcpy(in.data(), sp, static_cast<std::size_t>(n) * sizeof(double));
            } else {
                for (std::int64_t i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = sp[i * m + j];
            }
            if (adjoint)
                op.apply_adjoint(in.data(), out.data());
            else
                op.apply(in.data(), out.data());
            if (m == 1) {
                if (accumulate)
                    kernels::axpy(1.0, out.data(), dp, static_cast<std::size_t>(n));
                else
                    std::memcpy(dp, out.data(), static_cast<std::size_t>(n) * sizeof(double));
            } else {
                for (std::int64_t i = 0; i < n; ++i) {
                    if (accumulate)
                        dp[i * m + j] += out[static_cast<std::size_t>(i)];
                    else
                        dp[i * m + j] = out[static_cast<std::size_t>(i)];
                }
            }
        }
    }
}

Tensor operator_apply_impl(const ConvOperator& op, const Tensor& x,
                           bool adjoint, const char* name) {
    const Shape& s = x.shape();
    if (s.rank < 3)
        throw std::invalid_argument(std::string(name) +
                                    ": expected rank 3 or 4, got " + s.str());
    if (s[2] != op.n())
        throw std::invalid_argument(std::string(name) + ": time axis " +
                                    std::to_string(s[2]) +
                                    " != operator n = " +
                                    std::to_string(op.n()));
    std::vector<double> out(x.values().size());
    apply_along_time(op, adjoint, s, x.data(), out.data(), false);
    auto px = x.node();
    ConvOperator op_copy = op; // keep alive for the backward closure
    return make_result(name, s, std::move(out), {px},
                       [px, op_copy = std::move(op_copy),
                        adjoint](detail::Node& self) {
                           apply_along_time(op_copy, !adjoint, self.shape,
                                            self.grad.data(),
                                            px->grad_buf().data(), true);
                       });
}

} // namespace

Tensor operator_apply(const ConvOperator& op, const Tensor& x) {
    return operator_apply_impl(op, x, false, "operator_apply");
}

Tensor operator_apply_adjoint(const ConvOperator& op, const Tensor& y) {
    return operator_apply_impl(op, y, true, "operator_apply_adjoint");
}

} // namespace lpsd::nn
