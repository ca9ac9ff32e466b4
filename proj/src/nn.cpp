#include "splitbargain/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "splitbargain/rng.hpp"

namespace splitbargain {

namespace {

constexpr char kMagic[4] = {'S', 'B', 'N', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

void check_shapes_match(const ModelParams& a, const ModelParams& b, const char* what) {
  if (a.layers.size() != b.layers.size()) throw validation_error(std::string(what) + ": layer count mismatch");
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].in_width != b.layers[i].in_width ||
        a.layers[i].out_width != b.layers[i].out_width)
      throw validation_error(std::string(what) + ": layer " + std::to_string(i) + " shape mismatch");
}

}  // namespace

std::size_t ModelParams::total_params() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.param_count();
  return total;
}

std::vector<std::size_t> ModelParams::layer_param_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(layers.size());
  for (const auto& l : layers) counts.push_back(l.param_count());
  return counts;
}

std::vector<std::size_t> default_hidden_widths() {
  std::vector<std::size_t> widths{73};
  widths.insert(widths.end(), 10, 155);
  return widths;
}

ModelParams build_model(std::size_t input_width, std::span<const std::size_t> hidden_widths,
                        std::size_t n_classes, std::uint64_t seed) {
  if (input_width < 1 || n_classes < 1) throw validation_error("model widths: must be >= 1");
  for (std::size_t w : hidden_widths)
    if (w < 1) throw validation_error("hidden_widths: must be >= 1");

  RngStream root(seed);
  ModelParams model;
  std::size_t in = input_width;
  auto add_layer = [&](std::size_t out, LayerKind kind, std::size_t layer_index) {
    Layer layer;
    layer.kind = kind;
    layer.in_width = in;
    layer.out_width = out;
    layer.weights.resize(in * out);
    layer.bias.assign(out, 0.0f);
    RngStream stream = root.derive(layer_index);
    const double limit = 1.0 / std::sqrt(static_cast<double>(in));
    for (float& w : layer.weights) w = static_cast<float>(stream.uniform(-limit, limit));
    model.layers.push_back(std::move(layer));
    in = out;
  };
  for (std::size_t i = 0; i < hidden_widths.size(); ++i)
    add_layer(hidden_widths[i], LayerKind::kDenseRelu, i);
  add_layer(n_classes, LayerKind::kDenseOutput, hidden_widths.size());
  return model;
}

SplitModel split_at(const ModelParams& model, std::size_t cut_index) {
  if (model.layers.empty()) throw validation_error("split_at: empty model");
  if (cut_index >= model.layers.size())
    throw validation_error("cut_index: " + std::to_string(cut_index) + " out of range [0, " +
                           std::to_string(model.layers.size() - 1) + "]");
  SplitModel split;
  split.cut_index = cut_index;
  split.device_part.layers.assign(model.layers.begin(), model.layers.begin() + cut_index + 1);
  split.server_part.layers.assign(model.layers.begin() + cut_index + 1, model.layers.end());
  return split;
}

Matrix forward_part(const ModelParams& part, const Matrix& input, ForwardCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  Matrix current = input;
  for (const Layer& layer : part.layers) {
    if (current.cols != layer.in_width)
      throw validation_error("forward: input width " + std::to_string(current.cols) +
                             " does not match layer in_width " + std::to_string(layer.in_width));
    Matrix z(current.rows, layer.out_width);
    for (std::size_t b = 0; b < current.rows; ++b) {
      const float* x = current.row(b);
      float* zrow = z.row(b);
      for (std::size_t o = 0; o < layer.out_width; ++o) {
        const float* w = layer.weights.data() + o * layer.in_width;
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_width; ++i) acc += double(w[i]) * double(x[i]);
        zrow[o] = static_cast<float>(acc);
      }
    }
    if (cache) {
      cache->inputs.push_back(std::move(current));
      cache->preacts.push_back(z);
    }
    if (layer.kind == LayerKind::kDenseRelu)
      for (float& v : z.data) v = v > 0.0f ? v : 0.0f;
    current = std::move(z);
  }
  return current;
}

ActivationBatch forward_device(const ModelParams& device_part, const Matrix& batch,
                               std::vector<int> labels, ForwardCache& cache) {
  if (labels.size() != batch.rows)
    throw validation_error("forward_device: label count does not match batch rows");
  ActivationBatch out;
  out.activations = forward_part(device_part, batch, &cache);
  out.labels = std::move(labels);
  return out;
}

namespace {

// Softmax and mean cross-entropy from logits, log-sum-exp form, 64-bit math.
ServerForward softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const std::size_t n_classes = logits.cols;
  ServerForward out;
  out.probabilities = Matrix(logits.rows, n_classes);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes)
      throw validation_error("label " + std::to_string(label) + " out of range [0, " +
                             std::to_string(n_classes) + ")");
    const float* row = logits.row(b);
    double max_logit = row[0];
    for (std::size_t c = 1; c < n_classes; ++c) max_logit = std::max(max_logit, double(row[c]));
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) sum_exp += std::exp(double(row[c]) - max_logit);
    const double log_sum = std::log(sum_exp);
    float* prow = out.probabilities.row(b);
    for (std::size_t c = 0; c < n_classes; ++c)
      prow[c] = static_cast<float>(std::exp(double(row[c]) - max_logit - log_sum));
    loss_sum += -(double(row[label]) - max_logit - log_sum);
  }
  out.loss = loss_sum / static_cast<double>(logits.rows);
  return out;
}

}  // namespace

ServerForward forward_server(const ModelParams& server_part, const ActivationBatch& batch,
                             ForwardCache& cache) {
  const Matrix logits = forward_part(server_part, batch.activations, &cache);
  return softmax_cross_entropy(logits, batch.labels);
}

Matrix loss_gradient(const Matrix& probabilities, std::span<const int> labels) {
  Matrix grad = probabilities;
  const float inv_batch = 1.0f / static_cast<float>(probabilities.rows);
  for (std::size_t b = 0; b < grad.rows; ++b) {
    float* row = grad.row(b);
    row[labels[b]] -= 1.0f;
    for (std::size_t c = 0; c < grad.cols; ++c) row[c] *= inv_batch;
  }
  return grad;
}

Matrix backward_part(const ModelParams& part, const ForwardCache& cache, const Matrix& output_grad,
                     std::vector<LayerGrads>& grads) {
  if (cache.inputs.size() != part.layers.size())
    throw validation_error("backward: cache does not match part");
  grads.assign(part.layers.size(), {});

  Matrix dout = output_grad;
  for (std::size_t li = part.layers.size(); li-- > 0;) {
    const Layer& layer = part.layers[li];
    const Matrix& x = cache.inputs[li];
    const Matrix& z = cache.preacts[li];
    if (dout.rows != x.rows || dout.cols != layer.out_width)
      throw validation_error("backward: gradient shape mismatch at layer " + std::to_string(li));

    // dz = dout masked by ReLU'(z); the output layer is linear here.
    Matrix dz = dout;
    if (layer.kind == LayerKind::kDenseRelu)
      for (std::size_t j = 0; j < dz.data.size(); ++j)
        if (z.data[j] <= 0.0f) dz.data[j] = 0.0f;

    LayerGrads& g = grads[li];
    g.dweights.assign(layer.weights.size(), 0.0);
    g.dbias.assign(layer.out_width, 0.0);
    for (std::size_t b = 0; b < dz.rows; ++b) {
      const float* dzrow = dz.row(b);
      const float* xrow = x.row(b);
      for (std::size_t o = 0; o < layer.out_width; ++o) {
        const double d = dzrow[o];
        if (d == 0.0) continue;
        g.dbias[o] += d;
        double* dw = g.dweights.data() + o * layer.in_width;
        for (std::size_t i = 0; i < layer.in_width; ++i) dw[i] += d * double(xrow[i]);
      }
    }

    Matrix dx(dz.rows, layer.in_width);
    std::vector<double> acc(layer.in_width);
    for (std::size_t b = 0; b < dz.rows; ++b) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const float* dzrow = dz.row(b);
      for (std::size_t o = 0; o < layer.out_width; ++o) {
        const double d = dzrow[o];
        if (d == 0.0) continue;
        const float* w = layer.weights.data() + o * layer.in_width;
        for (std::size_t i = 0; i < layer.in_width; ++i) acc[i] += d * double(w[i]);
      }
      float* dxrow = dx.row(b);
      for (std::size_t i = 0; i < layer.in_width; ++i) dxrow[i] = static_cast<float>(acc[i]);
    }
    dout = std::move(dx);
  }
  return dout;
}

AdamState AdamState::for_model(const ModelParams& model) {
  AdamState state;
  state.slots.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    state.slots[i].m_weights.assign(model.layers[i].weights.size(), 0.0);
    state.slots[i].v_weights.assign(model.layers[i].weights.size(), 0.0);
    state.slots[i].m_bias.assign(model.layers[i].bias.size(), 0.0);
    state.slots[i].v_bias.assign(model.layers[i].bias.size(), 0.0);
  }
  return state;
}

namespace {

void adam_update(std::span<float> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& cfg) {
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j];
    m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
    v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[j] / bias1;
    const double v_hat = v[j] / bias2;
    params[j] = static_cast<float>(double(params[j]) -
                                   cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

}  // namespace

void adam_step(ModelParams& params, const std::vector<LayerGrads>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.layers.size() || state.slots.size() != params.layers.size())
    throw validation_error("adam_step: gradient/state layer count mismatch");
  state.step += 1;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    Layer& layer = params.layers[i];
    AdamState::Slot& slot = state.slots[i];
    if (grads[i].dweights.size() != layer.weights.size() ||
        grads[i].dbias.size() != layer.bias.size())
      throw validation_error("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    adam_update(layer.weights, grads[i].dweights, slot.m_weights, slot.v_weights, state.step, cfg);
    adam_update(layer.bias, grads[i].dbias, slot.m_bias, slot.v_bias, state.step, cfg);
  }
}

Matrix backward_server(ModelParams& server_part, const ForwardCache& cache,
                       const ActivationBatch& batch, const ServerForward& forward,
                       AdamState& state, const AdamConfig& cfg) {
  const Matrix dlogits = loss_gradient(forward.probabilities, batch.labels);
  if (server_part.layers.empty()) return dlogits;  // degenerate all-on-device split
  std::vector<LayerGrads> grads;
  Matrix activation_grad = backward_part(server_part, cache, dlogits, grads);
  adam_step(server_part, grads, state, cfg);
  return activation_grad;
}

void backward_device(ModelParams& device_part, const ForwardCache& cache,
                     const Matrix& activation_grad, AdamState& state, const AdamConfig& cfg) {
  std::vector<LayerGrads> grads;
  backward_part(device_part, cache, activation_grad, grads);
  adam_step(device_part, grads, state, cfg);
}

double monolithic_step(ModelParams& model, const Matrix& batch, std::span<const int> labels,
                       AdamState& state, const AdamConfig& cfg) {
  ForwardCache cache;
  const Matrix logits = forward_part(model, batch, &cache);
  const ServerForward sf = softmax_cross_entropy(logits, labels);
  const Matrix dlogits = loss_gradient(sf.probabilities, labels);
  std::vector<LayerGrads> grads;
  backward_part(model, cache, dlogits, grads);
  adam_step(model, grads, state, cfg);
  return sf.loss;
}

namespace {

std::vector<double> normalized_weights(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw validation_error("fedavg weights: must be >= 0");
    sum += w;
  }
  if (sum <= 0.0) throw validation_error("fedavg weights: must not all be zero");
  std::vector<double> norm(weights.begin(), weights.end());
  for (double& w : norm) w /= sum;
  return norm;
}

}  // namespace

ModelParams fedavg(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw validation_error("fedavg: no models");
  if (models.size() != weights.size())
    throw validation_error("fedavg: weight count does not match model count");
  for (const auto& m : models) check_shapes_match(models[0], m, "fedavg");
  const std::vector<double> norm = normalized_weights(weights);

  ModelParams out = models[0];
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    Layer& layer = out.layers[li];
    for (std::size_t j = 0; j < layer.weights.size(); ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < models.size(); ++m)
        acc += norm[m] * double(models[m].layers[li].weights[j]);
      layer.weights[j] = static_cast<float>(acc);
    }
    for (std::size_t j = 0; j < layer.bias.size(); ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < models.size(); ++m)
        acc += norm[m] * double(models[m].layers[li].bias[j]);
      layer.bias[j] = static_cast<float>(acc);
    }
  }
  return out;
}

AdamState fedavg_states(std::span<const AdamState> states, std::span<const double> weights) {
  if (states.empty()) throw validation_error("fedavg_states: no states");
  if (states.size() != weights.size())
    throw validation_error("fedavg_states: weight count does not match state count");
  for (const auto& s : states)
    if (s.step != states[0].step || s.slots.size() != states[0].slots.size())
      throw validation_error("fedavg_states: states out of sync");
  const std::vector<double> norm = normalized_weights(weights);

  AdamState out = states[0];
  auto average = [&](std::vector<double> AdamState::Slot::* member, std::size_t slot_idx) {
    auto& dst = out.slots[slot_idx].*member;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < states.size(); ++m)
        acc += norm[m] * (states[m].slots[slot_idx].*member)[j];
      dst[j] = acc;
    }
  };
  for (std::size_t i = 0; i < out.slots.size(); ++i) {
    average(&AdamState::Slot::m_weights, i);
    average(&AdamState::Slot::v_weights, i);
    average(&AdamState::Slot::m_bias, i);
    average(&AdamState::Slot::v_bias, i);
  }
  return out;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw parse_error(std::string("model checkpoint truncated while reading ") + what);
  return std::uint32_t(bytes[0]) | std::uint32_t(bytes[1]) << 8 | std::uint32_t(bytes[2]) << 16 |
         std::uint32_t(bytes[3]) << 24;
}

void write_f32(std::ostream& out, std::span<const float> values) {
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
  }
}

void read_f32(std::istream& in, std::span<float> values, const char* what) {
  for (float& v : values) {
    const std::uint32_t bits = read_u32(in, what);
    std::memcpy(&v, &bits, 4);
  }
}

}  // namespace

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw parse_error("cannot write model checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const Layer& layer : model.layers) {
    write_u32(out, static_cast<std::uint32_t>(layer.in_width));
    write_u32(out, static_cast<std::uint32_t>(layer.out_width));
    write_f32(out, layer.weights);
    write_f32(out, layer.bias);
  }
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open model checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw parse_error("bad model checkpoint magic at offset 0 (expected \"SBNN\")");
  const std::uint32_t version = read_u32(in, "version");
  if (version != kCheckpointVersion)
    throw parse_error("unsupported model checkpoint version " + std::to_string(version));
  const std::uint32_t n_layers = read_u32(in, "layer count");
  ModelParams model;
  model.layers.resize(n_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    Layer& layer = model.layers[i];
    layer.in_width = read_u32(in, "in_width");
    layer.out_width = read_u32(in, "out_width");
    layer.kind = (i + 1 == n_layers) ? LayerKind::kDenseOutput : LayerKind::kDenseRelu;
    layer.weights.resize(layer.in_width * layer.out_width);
    layer.bias.resize(layer.out_width);
    read_f32(in, layer.weights, "weights");
    read_f32(in, layer.bias, "biases");
  }
  return model;
}

std::vector<int> predict_classes(const Matrix& logits) {
  std::vector<int> classes(logits.rows);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const float* row = logits.row(b);
    int best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (row[c] > row[best]) best = static_cast<int>(c);
    classes[b] = best;
  }
  return classes;
}

}  // namespace splitbargain
