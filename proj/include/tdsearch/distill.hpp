#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdsearch/contraction.hpp"
#include "tdsearch/factorize.hpp"
#include "tdsearch/rng.hpp"

namespace tds {

/// Mean over rows of (1 - cosine similarity); 0 iff every row pair is
/// positively parallel. A zero-norm row (either side) contributes 1.
double cos_embed_loss(const DenseTensor& a, const DenseTensor& b);
/// Gradient of cos_embed_loss with respect to b.
DenseTensor cos_embed_loss_grad(const DenseTensor& a, const DenseTensor& b);

/// 1/2 KL(softmax(y_t/tau) || softmax(y_s/tau)) + 1/2 CE(softmax(y_s),
/// argmax(y_t)), averaged over rows. The KL term is 0 iff the softened
/// distributions coincide.
double logit_loss(const DenseTensor& y_s, const DenseTensor& y_t, double tau);
/// Gradient of logit_loss with respect to y_s.
DenseTensor logit_loss_grad(const DenseTensor& y_s, const DenseTensor& y_t, double tau);

double cross_entropy_loss(const DenseTensor& logits, std::span<const std::size_t> labels);
DenseTensor cross_entropy_grad(const DenseTensor& logits, std::span<const std::size_t> labels);

/// y = x * reconstruct(f) evaluated through the layer's contraction plan;
/// x is (batch, M), the result (batch, N).
DenseTensor layer_forward(const FactorizedLinear& f, const DenseTensor& x);

struct LayerGrads {
    std::vector<DenseTensor> core_grads;  ///< aligned with f.cores
    DenseTensor input_grad;               ///< (batch, M)
};

/// Chain rule through the layer einsum: each core gradient is the
/// contraction of the upstream gradient with x and the other cores.
LayerGrads layer_backward(const FactorizedLinear& f, const DenseTensor& x,
                          const DenseTensor& upstream);

// ---------------------------------------------------------------------------
// Toy training pipeline

struct Dataset {
    DenseTensor inputs;  ///< (count, dim)
    std::vector<std::size_t> labels;

    std::size_t count() const { return labels.size(); }
    std::size_t dim() const { return inputs.extent(1); }
};

struct ClusterTaskConfig {
    std::size_t train_count = 256;
    std::size_t test_count = 512;
    std::size_t dim = 16;
    std::size_t classes = 4;
    double separation = 2.0;  ///< class-mean radius
    double noise = 0.6;
    std::uint64_t seed = 0;
};

struct ClusterTask {
    Dataset train;
    Dataset test;
};

/// Gaussian clusters on a sphere; labels cycle through classes.
ClusterTask make_cluster_task(const ClusterTaskConfig& config);

/// Hidden linear layers (dense or factorized) with tanh between them and a
/// final linear classifier head.
struct ToyNet {
    struct Layer {
        bool factorized = false;
        DenseTensor dense;        ///< (in, out) when !factorized
        FactorizedLinear factor;  ///< when factorized
    };
    std::vector<Layer> hidden;
    DenseTensor head;  ///< (last hidden dim, classes)
};

/// Dense net with seeded Gaussian weights scaled by 1/sqrt(fan_in).
/// layer_dims = (d_0, ..., d_L): hidden matrices d_i x d_{i+1}.
ToyNet make_dense_net(std::span<const std::size_t> layer_dims, std::size_t classes,
                      std::uint64_t seed);

/// Replace every hidden layer by its optimal layer-wise projection.
ToyNet factorize_net(const ToyNet& teacher, Format format,
                     const std::vector<TensorizationShape>& shapes,
                     const std::vector<RankSpec>& ranks, const ProjectOptions& options = {});

struct ForwardTrace {
    std::vector<DenseTensor> pre;   ///< per hidden layer, before tanh
    std::vector<DenseTensor> post;  ///< per hidden layer, after tanh
    DenseTensor logits;
};

ForwardTrace net_forward(const ToyNet& net, const DenseTensor& x);
double net_accuracy(const ToyNet& net, const Dataset& data);

struct DistillConfig {
    std::size_t stage1_epochs = 8;
    std::size_t stage2_epochs = 8;
    double temperature = 2.0;
    double learning_rate = 0.05;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

struct TrainResult {
    ToyNet net;
    std::vector<double> stage1_curve;  ///< per-epoch mean loss
    std::vector<double> stage2_curve;
};

/// Two-stage distillation: align pre- and post-activation hidden states with
/// cosine losses, then logit-only distillation. The student should already be
/// projection-initialized. Throws on divergence (NaN loss).
TrainResult train_two_stage(const ToyNet& teacher, ToyNet student, const Dataset& data,
                            const DistillConfig& config);

/// Plain cross-entropy fine-tuning on labels (the no-distillation baseline).
TrainResult train_finetune(ToyNet net, const Dataset& data, std::size_t epochs,
                           double learning_rate, std::size_t batch_size, std::uint64_t seed);

}  // namespace tds
