#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splitbargain/errors.hpp"

namespace splitbargain {

/// Row-major batch-by-width matrix of 32-bit reals. Reductions over its
/// entries accumulate in 64-bit.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  float* row(std::size_t r) { return data.data() + r * cols; }
  const float* row(std::size_t r) const { return data.data() + r * cols; }
  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class LayerKind {
  kDenseRelu,    // dense + ReLU
  kDenseOutput,  // dense; softmax is fused into the loss
};

struct Layer {
  LayerKind kind = LayerKind::kDenseRelu;
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  std::vector<float> weights;  // row-major, out_width rows of in_width
  std::vector<float> bias;     // out_width

  std::size_t param_count() const { return weights.size() + bias.size(); }
};

/// A chain of dense blocks ending in one output layer.
struct ModelParams {
  std::vector<Layer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : layers.front().in_width; }
  std::size_t output_width() const { return layers.empty() ? 0 : layers.back().out_width; }
  std::size_t total_params() const;
  std::vector<std::size_t> layer_param_counts() const;
};

/// Device-side and server-side halves of one model, split after cut_index.
struct SplitModel {
  ModelParams device_part;
  ModelParams server_part;
  std::size_t cut_index = 0;

  std::size_t device_params() const { return device_part.total_params(); }
  std::size_t server_params() const { return server_part.total_params(); }
};

/// Activations of the cut layer together with the labels of the mini-batch
/// they came from; exactly what a device uploads.
struct ActivationBatch {
  Matrix activations;
  std::vector<int> labels;
};

/// Default architecture: input 784, block C0 784->73, blocks C1..C10 of width
/// 155, classifier 155->10. Totals 287955 parameters with 117135 of them in
/// C0..C3; cutting after C3 puts fraction 0.4068 on the device.
std::vector<std::size_t> default_hidden_widths();
inline constexpr std::size_t kDefaultInputWidth = 784;
inline constexpr std::size_t kDefaultClasses = 10;

/// Builds dense+ReLU blocks for each hidden width, then an output layer.
/// Weights are fan-in-scaled uniform U(-1/sqrt(in), 1/sqrt(in)), biases zero.
/// Each layer draws from its own derived stream, deterministic per seed.
ModelParams build_model(std::size_t input_width, std::span<const std::size_t> hidden_widths,
                        std::size_t n_classes, std::uint64_t seed);

/// Layers 0..cut_index inclusive go to the device, the rest to the server.
/// The last valid index puts the entire model on the device (empty server
/// part). Throws validation_error when cut_index is out of range.
SplitModel split_at(const ModelParams& model, std::size_t cut_index);

/// Per-layer state captured during a forward pass for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;   // input seen by each layer
  std::vector<Matrix> preacts;  // W x + b of each layer
};

/// Runs the part's layers in order. If cache is non-null it is filled for a
/// later backward pass. The output of a kDenseOutput layer is raw logits.
Matrix forward_part(const ModelParams& part, const Matrix& input, ForwardCache* cache);

/// Device half of one forward step: ReLU blocks applied in order.
ActivationBatch forward_device(const ModelParams& device_part, const Matrix& batch,
                               std::vector<int> labels, ForwardCache& cache);

struct ServerForward {
  Matrix probabilities;  // softmax rows
  double loss = 0.0;     // mean cross-entropy over the batch
};

/// Server half of the forward step plus the loss. An empty server part treats
/// the incoming activations as logits.
ServerForward forward_server(const ModelParams& server_part, const ActivationBatch& batch,
                             ForwardCache& cache);

/// Parameter gradients of one layer; accumulated in 64-bit.
struct LayerGrads {
  std::vector<double> dweights;
  std::vector<double> dbias;
};

/// d(mean cross-entropy)/d(logits) = (softmax - onehot) / batch.
Matrix loss_gradient(const Matrix& probabilities, std::span<const int> labels);

/// Backprop through a part given the gradient at its output; fills grads
/// (resized to the part) and returns the gradient at the part's input.
Matrix backward_part(const ModelParams& part, const ForwardCache& cache, const Matrix& output_grad,
                     std::vector<LayerGrads>& grads);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments, 64-bit, one slot per layer.
struct AdamState {
  struct Slot {
    std::vector<double> m_weights, v_weights, m_bias, v_bias;
  };
  std::int64_t step = 0;
  std::vector<Slot> slots;

  static AdamState for_model(const ModelParams& model);
};

/// One Adam update with bias correction; parameters stay 32-bit.
void adam_step(ModelParams& params, const std::vector<LayerGrads>& grads, AdamState& state,
               const AdamConfig& cfg);

/// Server half of the backward pass: computes the loss gradient, updates the
/// server parameters with one Adam step and returns d(loss)/d(activations),
/// the gradient the device needs to continue.
Matrix backward_server(ModelParams& server_part, const ForwardCache& cache,
                       const ActivationBatch& batch, const ServerForward& forward,
                       AdamState& state, const AdamConfig& cfg);

/// Device half: continues backprop from the received activation gradient and
/// applies one Adam step to the device parameters.
void backward_device(ModelParams& device_part, const ForwardCache& cache,
                     const Matrix& activation_grad, AdamState& state, const AdamConfig& cfg);

/// One full training step on an unsplit model; the reference against which a
/// split step must be equivalent. Returns the batch loss.
double monolithic_step(ModelParams& model, const Matrix& batch, std::span<const int> labels,
                       AdamState& state, const AdamConfig& cfg);

/// Parameterwise weighted mean; weights are normalized to sum 1. Throws
/// validation_error on shape mismatch, negative or all-zero weights.
ModelParams fedavg(std::span<const ModelParams> models, std::span<const double> weights);

/// Same weighted mean over Adam moments (steps must agree).
AdamState fedavg_states(std::span<const AdamState> states, std::span<const double> weights);

/// Checkpoint: magic "SBNN", u32 version, u32 layer count, then per layer
/// u32 in, u32 out, row-major f32 weights, f32 biases; all little-endian.
/// The last layer is the output layer, all previous ones are dense+ReLU.
void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// Argmax class per row.
std::vector<int> predict_classes(const Matrix& logits);

}  // namespace splitbargain
