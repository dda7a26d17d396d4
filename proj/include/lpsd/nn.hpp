#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpsd/rng.hpp"
#include "lpsd/tensor.hpp"

// The layer set the proximal CNN needs: same-size convolution (NN
// cross-correlation convention, zero padding), GroupNorm, and an Adam
// optimizer. Convolutions reduce to shifted axpy/dot spans, so the SIMD
// kernels carry the inner loops.

namespace lpsd::nn {

struct ConvLayer {
    Tensor weight; // (Co, Ci, k) in 1D, (Co, Ci, k, k) in 2D
    Tensor bias;   // (Co)
    int dims = 1;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel = 0;
    std::int64_t pad = 0; // (kernel - 1) / 2, keeps spatial size

    // Kaiming-uniform weights (fan-in), zero bias. kernel must be odd.
    static ConvLayer create(int dims, std::int64_t in_channels,
                            std::int64_t out_channels, std::int64_t kernel,
                            rng::Stream& init);
};

// Cross-correlation with zero padding; output spatial dims equal the
// input's.
Tensor conv_forward(const ConvLayer& layer, const Tensor& x);

struct GroupNormLayer {
    Tensor scale; // (C), init 1
    Tensor shift; // (C), init 0
    std::int64_t channels = 0;
    std::int64_t groups = 0;
    double epsilon = 1e-5;
    bool affine = true; // off: scale/shift frozen at 1/0, no gradients

    static GroupNormLayer create(std::int64_t channels, std::int64_t groups,
                                 double epsilon = 1e-5, bool affine = true);
};

// Per (sample, group): subtract mean, divide by sqrt(var + eps), then apply
// the per-channel affine. Statistics run over channels-within-group x
// spatial.
Tensor groupnorm_forward(const GroupNormLayer& layer, const Tensor& x);

// Adam with bias correction. Moment buffers persist across steps; step()
// throws lpsd::StateError if any parameter has never received a gradient.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, double lr = 1e-3,
                  double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    std::int64_t step_count() const { return t_; }

    // Checkpoint access.
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(std::int64_t step_count, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t t_ = 0;
    double lr_, beta1_, beta2_, eps_;
};

} // namespace lpsd::nn
