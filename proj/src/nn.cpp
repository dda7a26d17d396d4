#include "lpsd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lpsd/errors.hpp"
#include "lpsd/kernels.hpp"

namespace lpsd::nn {

namespace {

// Fills one output channel plane with the bias value.
void fill_plane(double* dst, std::int64_t len, double value) {
    std::fill(dst, dst + len, value);
}

// 1D convolution core. x (B, Ci, N) -> out (B, Co, N), out[t] +=
// W[co,ci,k] * x[t + k - pad]; every tap is an axpy over the t-range where
// the shifted index is in bounds.
void conv1d_value(const double* x, const double* w, const double* b,
                  double* out, std::int64_t batch, std::int64_t ci,
                  std::int64_t co, std::int64_t n, std::int64_t k,
                  std::int64_t pad) {
    for (std::int64_t nb = 0; nb < batch; ++nb) {
        const double* xb = x + nb * ci * n;
        double* ob = out + nb * co * n;
        for (std::int64_t oc = 0; oc < co; ++oc) {
            double* orow = ob + oc * n;
            fill_plane(orow, n, b[oc]);
            for (std::int64_t ic = 0; ic < ci; ++ic) {
                const double* xrow = xb + ic * n;
                const double* wrow = w + (oc * ci + ic) * k;
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    const std::int64_t shift = kk - pad;
                    const std::int64_t t0 = std::max<std::int64_t>(0, -shift);
                    const std::int64_t t1 = std::min<std::int64_t>(n, n - shift);
                    if (t0 >= t1) continue;
                    kernels::axpy(wrow[kk], xrow + t0 + shift, orow + t0,
                                  static_cast<std::size_t>(t1 - t0));
                }
            }
        }
    }
}

// 2D convolution core. x (B, Ci, H, W); per tap (ky, kx) each valid output
// row is an axpy over a contiguous column span.
void conv2d_value(const double* x, const double* w, const double* b,
                  double* out, std::int64_t batch, std::int64_t ci,
                  std::int64_t co, std::int64_t h, std::int64_t wd,
                  std::int64_t k, std::int64_t pad) {
    const std::int64_t plane = h * wd;
    for (std::int64_t nb = 0; nb < batch; ++nb) {
        const double* xb = x + nb * ci * plane;
        double* ob = out + nb * co * plane;
        for (std::int64_t oc = 0; oc < co; ++oc) {
            double* oplane = ob + oc * plane;
            fill_plane(oplane, plane, b[oc]);
            for (std::int64_t ic = 0; ic < ci; ++ic) {
                const double* xplane = xb + ic * plane;
                const double* wmat = w + (oc * ci + ic) * k * k;
                for (std::int64_t ky = 0; ky < k; ++ky) {
                    const std::int64_t rshift = ky - pad;
                    const std::int64_t r0 = std::max<std::int64_t>(0, -rshift);
                    const std::int64_t r1 = std::min<std::int64_t>(h, h - rshift);
                    for (std::int64_t kx = 0; kx < k; ++kx) {
                        const double wv = wmat[ky * k + kx];
                        if (wv == 0.0) continue;
                        const std::int64_t cshift = kx - pad;
                        const std::int64_t c0 = std::max<std::int64_t>(0, -cshift);
                        const std::int64_t c1 = std::min<std::int64_t>(wd, wd - cshift);
                        if (c0 >= c1) continue;
                        for (std::int64_t r = r0; r < r1; ++r)
                            kernels::axpy(wv,
                                          xplane + (r + rshift) * wd + c0 + cshift,
                                          oplane + r * wd + c0,
                                          static_cast<std::size_t>(c1 - c0));
                    }
                }
            }
        }
    }
}

} // namespace

ConvLayer ConvLayer::create(int dims, std::int64_t in_channels,
                            std::int64_t out_channels, std::int64_t kernel,
                            rng::Stream& init) {
    if (dims != 1 && dims != 2)
        throw std::invalid_argument("ConvLayer: dims must be 1 or 2");
    if (in_channels < 1 || out_channels < 1)
        throw std::invalid_argument("ConvLayer: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("ConvLayer: kernel must be odd");

    ConvLayer l;
    l.dims = dims;
    l.in_channels = in_channels;
    l.out_channels = out_channels;
    l.kernel = kernel;
    l.pad = (kernel - 1) / 2;

    const std::int64_t taps = dims == 1 ? kernel : kernel * kernel;
    const double fan_in = static_cast<double>(in_channels * taps);
    const double bound = std::sqrt(6.0 / fan_in);
    const Shape wshape = dims == 1
                             ? Shape{out_channels, in_channels, kernel}
                             : Shape{out_channels, in_channels, kernel, kernel};
    std::vector<double> w(static_cast<std::size_t>(wshape.numel()));
    for (auto& v : w) v = init.uniform(-bound, bound);
    l.weight = Tensor::from(wshape, std::move(w), true);
    l.bias = Tensor::zeros(Shape{out_channels}, true);
    return l;
}

Tensor conv_forward(const ConvLayer& layer, const Tensor& x) {
    const Shape& s = x.shape();
    const int expect_rank = layer.dims == 1 ? 3 : 4;
    if (s.rank != expect_rank)
        throw std::invalid_argument("conv_forward: expected rank " +
                                    std::to_string(expect_rank) + ", got " +
                                    s.str());
    if (s[1] != layer.in_channels)
        throw std::invalid_argument(
            "conv_forward: input channels " + std::to_string(s[1]) +
            " != layer in_channels " + std::to_string(layer.in_channels));
    // The time axis must cover the kernel; the trace axis may be narrower
    // (single-trace blocks through a 2D net), zero padding covers the rest.
    if (s[2] < layer.kernel)
        throw std::invalid_argument("conv_forward: time axis shorter than kernel");

    Shape out_shape = s;
    out_shape.d[1] = layer.out_channels;

    const std::int64_t batch = s[0];
    const std::int64_t k = layer.kernel, pad = layer.pad;
    const std::int64_t ci = layer.in_channels, co = layer.out_channels;
    std::vector<double> out(static_cast<std::size_t>(out_shape.numel()));
    if (layer.dims == 1)
        conv1d_value(x.data(), layer.weight.data(), layer.bias.data(),
                     out.data(), batch, ci, co, s[2], k, pad);
    else
        conv2d_value(x.data(), layer.weight.data(), layer.bias.data(),
                     out.data(), batch, ci, co, s[2], s[3], k, pad);

    auto px = x.node();
    auto pw = layer.weight.node();
    auto pb = layer.bias.node();
    const std::int64_t h = s[2];
    const std::int64_t wd = s.rank == 4 ? s[3] : 1;
    const int dims = layer.dims;

    auto backward_fn = [px, pw, pb, batch, ci, co, h, wd, k, pad,
                        dims](detail::Node& self) {
        const std::int64_t plane = h * wd;
        const double* g = self.grad.data();
        const double* xv = px->value.data();
        const double* wv = pw->value.data();

        if (pb->on_tape) {
            auto& gb = pb->grad_buf();
            for (std::int64_t nb = 0; nb < batch; ++nb)
                for (std::int64_t oc = 0; oc < co; ++oc)
                    gb[oc] += kernels::sum(g + (nb * co + oc) * plane,
                                           static_cast<std::size_t>(plane));
        }

        if (dims == 1) {
            for (std::int64_t nb = 0; nb < batch; ++nb) {
                const double* gb_ = g + nb * co * plane;
                const double* xb = xv + nb * ci * plane;
                double* gxb = px->on_tape ? px->grad_buf().data() + nb * ci * plane
                                          : nullptr;
                for (std::int64_t oc = 0; oc < co; ++oc) {
                    const double* grow = gb_ + oc * plane;
                    for (std::int64_t ic = 0; ic < ci; ++ic) {
                        const double* xrow = xb + ic * plane;
                        const std::int64_t wbase = (oc * ci + ic) * k;
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            const std::int64_t shift = kk - pad;
                            const std::int64_t t0 = std::max<std::int64_t>(0, -shift);
                            const std::int64_t t1 = std::min<std::int64_t>(h, h - shift);
                            if (t0 >= t1) continue;
                            const auto len = static_cast<std::size_t>(t1 - t0);
                            if (pw->on_tape)
                                pw->grad_buf()[wbase + kk] +=
                                    kernels::dot(grow + t0, xrow + t0 + shift, len);
                            if (gxb)
                                kernels::axpy(wv[wbase + kk], grow + t0,
                                              gxb + ic * plane + t0 + shift, len);
                        }
                    }
                }
            }
        } else {
            for (std::int64_t nb = 0; nb < batch; ++nb) {
                const double* gb_ = g + nb * co * plane;
                const double* xb = xv + nb * ci * plane;
                double* gxb = px->on_tape ? px->grad_buf().data() + nb * ci * plane
                                          : nullptr;
                for (std::int64_t oc = 0; oc < co; ++oc) {
                    const double* gplane = gb_ + oc * plane;
                    for (std::int64_t ic = 0; ic < ci; ++ic) {
                        const double* xplane = xb + ic * plane;
                        const std::int64_t wbase = (oc * ci + ic) * k * k;
                        for (std::int64_t ky = 0; ky < k; ++ky) {
                            const std::int64_t rshift = ky - pad;
                            const std::int64_t r0 = std::max<std::int64_t>(0, -rshift);
                            const std::int64_t r1 = std::min<std::int64_t>(h, h - rshift);
                            for (std::int64_t kx = 0; kx < k; ++kx) {
                                const std::int64_t cshift = kx - pad;
                                const std::int64_t c0 = std::max<std::int64_t>(0, -cshift);
                                const std::int64_t c1 = std::min<std::int64_t>(wd, wd - cshift);
                                if (c0 >= c1) continue;
                                const auto len = static_cast<std::size_t>(c1 - c0);
                                double acc = 0.0;
                                for (std::int64_t r = r0; r < r1; ++r) {
                                    const double* gr = gplane + r * wd + c0;
                                    const double* xr =
                                        xplane + (r + rshift) * wd + c0 + cshift;
                                    if (pw->on_tape)
                                        acc += kernels::dot(gr, xr, len);
                                    if (gxb)
                                        kernels::axpy(wv[wbase + ky * k + kx], gr,
                                                      gxb + ic * plane +
                                                          (r + rshift) * wd + c0 +
                                                          cshift,
                                                      len);
                                }
                                if (pw->on_tape)
                                    pw->grad_buf()[wbase + ky * k + kx] += acc;
                            }
                        }
                    }
                }
            }
        }
    };

    return detail::make_op_result("conv_forward", out_shape, std::move(out), {px, pw, pb},
                            std::move(backward_fn));
}

GroupNormLayer GroupNormLayer::create(std::int64_t channels,
                                      std::int64_t groups, double epsilon,
                                      bool affine) {
    if (channels < 1 || groups < 1 || channels % groups != 0)
        throw std::invalid_argument(
            "GroupNormLayer: channels must divide into groups (" +
            std::to_string(channels) + " / " + std::to_string(groups) + ")");
    if (epsilon <= 0.0)
        throw std::invalid_argument("GroupNormLayer: epsilon must be > 0");
    GroupNormLayer l;
    l.channels = channels;
    l.groups = groups;
    l.epsilon = epsilon;
    l.affine = affine;
    l.scale = Tensor::full(Shape{channels}, 1.0, affine);
    l.shift = Tensor::zeros(Shape{channels}, affine);
    return l;
}

Tensor groupnorm_forward(const GroupNormLayer& layer, const Tensor& x) {
    const Shape& s = x.shape();
    if (s.rank < 3)
        throw std::invalid_argument("groupnorm_forward: expected rank 3 or 4");
    if (s[1] != layer.channels)
        throw std::invalid_argument("groupnorm_forward: channel mismatch");

    const std::int64_t batch = s[0];
    const std::int64_t ch = layer.channels;
    const std::int64_t groups = layer.groups;
    const std::int64_t cg = ch / groups;
    const std::int64_t sp = s.spatial();
    const std::int64_t block = cg * sp; // one group's elements, contiguous

    std::vector<double> out(x.values().size());
    // Cached for backward: normalized values and 1/std per (sample, group).
    auto xhat = std::make_shared<std::vector<double>>(x.values().size());
    auto inv_std = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(batch * groups));

    const double* xv = x.data();
    for (std::int64_t nb = 0; nb < batch; ++nb) {
        for (std::int64_t gi = 0; gi < groups; ++gi) {
            const std::int64_t base = nb * ch * sp + gi * block;
            const double mean =
                kernels::sum(xv + base, static_cast<std::size_t>(block)) /
                static_cast<double>(block);
            double var = 0.0;
            for (std::int64_t i = 0; i < block; ++i) {
                const double d = xv[base + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(block);
            const double is = 1.0 / std::sqrt(var + layer.epsilon);
            (*inv_std)[static_cast<std::size_t>(nb * groups + gi)] = is;
            kernels::normalize_affine(xv + base, mean, is, 1.0, 0.0,
                                      xhat->data() + base,
                                      static_cast<std::size_t>(block));
            for (std::int64_t c = 0; c < cg; ++c) {
                const std::int64_t chan = gi * cg + c;
                kernels::normalize_affine(
                    xv + base + c * sp, mean, is,
                    layer.scale.values()[static_cast<std::size_t>(chan)],
                    layer.shift.values()[static_cast<std::size_t>(chan)],
                    out.data() + base + c * sp, static_cast<std::size_t>(sp));
            }
        }
    }

    auto px = x.node();
    auto pscale = layer.scale.node();
    auto pshift = layer.shift.node();

    auto backward_fn = [px, pscale, pshift, xhat, inv_std, batch, ch, groups,
                        cg, sp, block](detail::Node& self) {
        const double* g = self.grad.data();
        const double* sc = pscale->value.data();
        std::vector<double> dxhat(static_cast<std::size_t>(block));
        for (std::int64_t nb = 0; nb < batch; ++nb) {
            for (std::int64_t gi = 0; gi < groups; ++gi) {
                const std::int64_t base = nb * ch * sp + gi * block;
                const double is =
                    (*inv_std)[static_cast<std::size_t>(nb * groups + gi)];
                const double* xh = xhat->data() + base;

                for (std::int64_t c = 0; c < cg; ++c) {
                    const std::int64_t chan = gi * cg + c;
                    const double* gc = g + base + c * sp;
                    const double* xhc = xh + c * sp;
                    if (pscale->on_tape)
                        pscale->grad_buf()[chan] +=
                            kernels::dot(gc, xhc, static_cast<std::size_t>(sp));
                    if (pshift->on_tape)
                        pshift->grad_buf()[chan] +=
                            kernels::sum(gc, static_cast<std::size_t>(sp));
                    for (std::int64_t i = 0; i < sp; ++i)
                        dxhat[static_cast<std::size_t>(c * sp + i)] =
                            gc[i] * sc[chan];
                }

                if (!px->on_tape) continue;
                const double nblock = static_cast<double>(block);
                const double s1 = kernels::sum(dxhat.data(), dxhat.size());
                const double s2 = kernels::dot(dxhat.data(), xh, dxhat.size());
                auto& gx = px->grad_buf();
                for (std::int64_t i = 0; i < block; ++i)
                    gx[base + i] += is * (dxhat[static_cast<std::size_t>(i)] -
                                          s1 / nblock -
                                          xh[i] * s2 / nblock);
            }
        }
    };

    return detail::make_op_result("groupnorm_forward", s, std::move(out), {px, pscale, pshift},
                            std::move(backward_fn));
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
    if (params_.empty())
        throw std::invalid_argument("Adam: no parameters");
    if (lr_ <= 0.0) throw std::invalid_argument("Adam: lr must be > 0");
    for (const auto& p : params_) {
        if (!p.requires_grad())
            throw std::invalid_argument("Adam: parameter without requires_grad");
        m_.emplace_back(p.values().size(), 0.0);
        v_.emplace_back(p.values().size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_)
        if (!p.grad_materialized())
            throw StateError("Adam::step: parameter has no gradient; "
                             "run backward first");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        kernels::adam_update(p.data(), p.grad().data(), m_[i].data(),
                             v_[i].data(), lr_, beta1_, beta2_, eps_, bc1, bc2,
                             p.values().size());
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::restore(std::int64_t step_count, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw std::invalid_argument("Adam::restore: moment count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (m[i].size() != params_[i].values().size() ||
            v[i].size() != params_[i].values().size())
            throw std::invalid_argument("Adam::restore: moment shape mismatch");
    t_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

} // namespace lpsd::nn
