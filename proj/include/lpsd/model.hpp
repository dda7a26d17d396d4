#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lpsd/metrics.hpp"
#include "lpsd/nn.hpp"
#include "lpsd/synthetic.hpp"
#include "lpsd/tensor.hpp"

// The unrolled learned-proximal network: K weight-tied CNN blocks. Each
// block takes a gradient step on the data-misfit term with a trainable,
// sigmoid-bounded step size, then applies a 5-layer CNN to the step result
// concatenated with the measurement:
//
//   x_{k+1} = CNN(x_k + s * A^T (y - A x_k), y),   s = 0.15 sigmoid(eta)
//
// Trained end to end on the MSE between x_K and the reflectivity.

namespace lpsd::model {

struct ModelConfig {
    int dims = 1;               // 1: single trace, 2: multi-trace blocks
    std::int64_t kappa = 5;     // conv kernel size (odd; 5 or 7 in practice)
    std::int64_t hidden = 64;   // hidden channels
    std::int64_t gn_groups = 8; // clamped to the largest divisor of hidden
    bool gn_affine = true;
    std::int64_t unroll = 5;    // K
    double eta_raw_init = 0.0;  // s = 0.075 at init

    void validate() const;
    // Group count actually used for hidden-channel layers.
    std::int64_t effective_groups() const;
};

// Five layers: (2 -> hidden) + GN + ReLU, twice (hidden -> hidden) + GN +
// ReLU, (hidden -> 1) + GN + ReLU, then a 1x1 linear conv.
struct ProxCNN {
    ModelConfig cfg;
    nn::ConvLayer conv1, conv2, conv3, conv4, conv5;
    nn::GroupNormLayer gn1, gn2, gn3, gn4;

    static ProxCNN create(const ModelConfig& cfg, std::uint64_t seed);

    nn::Tensor forward(const nn::Tensor& in) const;
    std::vector<std::pair<std::string, nn::Tensor>> named_parameters() const;
};

class UnrolledModel {
public:
    static constexpr double kStepCap = 0.15;

    static UnrolledModel create(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ProxCNN& cnn() { return cnn_; }
    const ProxCNN& cnn() const { return cnn_; }
    nn::Tensor& eta_raw() { return eta_raw_; }
    const nn::Tensor& eta_raw() const { return eta_raw_; }

    // Current bounded step size 0.15 * sigmoid(eta_raw).
    double step_size() const;
    // Same, on the tape (gradients reach eta_raw).
    nn::Tensor step_size_tensor() const;

    // One unrolled block: gradient step with step size s, then the CNN.
    nn::Tensor unroll_once(const nn::Tensor& x, const nn::Tensor& y,
                           const nn::Tensor& s, const ConvOperator& op) const;

    // Full K-block forward from x_0 = y. K == 0 degenerates to the identity
    // on y (test fixture). Throws lpsd::NumericError naming the unroll index
    // if an iterate goes non-finite.
    nn::Tensor forward(const nn::Tensor& y, const ConvOperator& op) const;

    // Grid in, grid out, no tape. A 1D model treats the m traces of the grid
    // as a batch; a 2D model processes the block jointly.
    Grid infer(const Grid& y, const ConvOperator& op) const;

    // CNN parameters plus eta_raw, in checkpoint order.
    std::vector<std::pair<std::string, nn::Tensor>> named_parameters() const;
    std::vector<nn::Tensor> parameters() const;

private:
    ModelConfig cfg_;
    ProxCNN cnn_;
    nn::Tensor eta_raw_;
};

struct TrainConfig {
    std::int64_t epochs = 50;
    std::int64_t batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    std::int64_t epoch = 0;
    double loss = 0.0;      // mean per-element MSE over the epoch
    double step_size = 0.0; // s(eta) after the epoch's last update
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

// End-to-end training: minimizes MSE(x_K, x / mag) over shuffled minibatches
// with Adam; eta_raw trains alongside the CNN weights. Deterministic given
// cfg.seed. Writes one CSV-style line per epoch to log when given. The
// bounded step size is asserted to stay inside (0, 0.15) after every
// optimizer step.
TrainHistory train(UnrolledModel& model, const Dataset& data,
                   const ConvOperator& op, const TrainConfig& cfg,
                   std::ostream* log = nullptr);

// Per-record metrics of denormalized reconstructions against the true
// reflectivity; aggregate row is the mean.
metrics::MetricsReport evaluate(const UnrolledModel& model,
                                const Dataset& data, const ConvOperator& op);

} // namespace lpsd::model
