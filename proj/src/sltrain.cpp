#include "splitbargain/sltrain.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "splitbargain/cost_utility.hpp"
#include "splitbargain/errors.hpp"

namespace splitbargain {

namespace {

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<DeviceData> bind_partitions(const Dataset& train, const Partition& train_partition,
                                        const Dataset& val, const Partition& val_partition) {
  if (train_partition.n_devices() != val_partition.n_devices())
    throw validation_error("train/val partitions disagree on device count");
  std::vector<DeviceData> data(train_partition.n_devices());
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k].train = &train;
    data[k].train_indices = train_partition.device_indices[k];
    data[k].val = &val;
    data[k].val_indices = val_partition.device_indices[k];
  }
  return data;
}

void TrainingRecord::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write CSV: " + path.string());
  const std::size_t n = rounds.empty() ? 0 : rounds.front().per_device_acc.size();
  out << "round,global_loss,mean_val_acc";
  for (std::size_t k = 0; k < n; ++k) out << ",per_device_acc_" << k;
  out << ",sim_time_s\n";
  for (const RoundMetrics& m : rounds) {
    out << m.round << "," << format_g(m.global_loss) << "," << format_g(m.mean_val_acc);
    for (double acc : m.per_device_acc) out << "," << format_g(acc);
    out << "," << format_g(m.sim_time_s) << "\n";
  }
}

double simulate_round_time(const Scenario& scenario, double alpha,
                           std::span<const double> expected_taus) {
  if (expected_taus.size() != scenario.n_devices())
    throw validation_error("expected_taus: length must equal n_devices");
  double max_device_time = 0.0;
  for (const auto& d : scenario.devices)
    max_device_time = std::max(max_device_time, device_compute_time(SplitFraction{alpha}, d));
  const double max_tau = *std::max_element(expected_taus.begin(), expected_taus.end());
  return server_compute_time(SplitFraction{alpha}, scenario) + max_device_time +
         scenario.server.local_steps * max_tau;
}

EvalResult evaluate(std::span<const ModelParams> device_parts, const ModelParams& server_part,
                    std::span<const DeviceData> data, std::size_t batch_size) {
  if (device_parts.size() != data.size())
    throw validation_error("evaluate: model count does not match device data count");
  EvalResult result;
  result.per_device.assign(data.size(), 0.0);
  std::size_t total_correct = 0;
  std::size_t total_count = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const DeviceData& dd = data[k];
    if (!dd.val || dd.val_indices.empty()) continue;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < dd.val_indices.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, dd.val_indices.size() - start);
      const std::span<const std::size_t> idx(dd.val_indices.data() + start, count);
      const Matrix batch = dd.val->gather(idx);
      const std::vector<int> labels = dd.val->gather_labels(idx);
      const Matrix hidden = forward_part(device_parts[k], batch, nullptr);
      const Matrix logits = forward_part(server_part, hidden, nullptr);
      const std::vector<int> predicted = predict_classes(logits);
      for (std::size_t i = 0; i < count; ++i)
        if (predicted[i] == labels[i]) ++correct;
    }
    result.per_device[k] =
        static_cast<double>(correct) / static_cast<double>(dd.val_indices.size());
    total_correct += correct;
    total_count += dd.val_indices.size();
  }
  result.mean = total_count == 0
                    ? 0.0
                    : static_cast<double>(total_correct) / static_cast<double>(total_count);
  return result;
}

TrainState init_train_state(const Scenario& scenario, std::span<const DeviceData> data,
                            const ModelConfig& model_cfg, std::size_t cut_index,
                            const TrainConfig& cfg, std::span<const double> expected_taus) {
  const std::size_t n = data.size();
  if (n == 0) throw validation_error("device data: must not be empty");
  for (std::size_t k = 0; k < n; ++k)
    if (!data[k].train || data[k].train_indices.empty())
      throw validation_error("device " + std::to_string(k) + " has an empty training partition");
  if (scenario.n_devices() != n)
    throw validation_error("device data count does not match scenario n_devices");

  const ModelParams model = build_model(model_cfg.input_width, model_cfg.hidden_widths,
                                        model_cfg.n_classes, cfg.seed);
  const SplitModel split = split_at(model, cut_index);

  TrainState state;
  state.alpha = static_cast<double>(split.device_params()) /
                static_cast<double>(model.total_params());
  state.round_time_s = simulate_round_time(scenario, state.alpha, expected_taus);
  RngStream root(cfg.seed);
  for (std::size_t k = 0; k < n; ++k) {
    state.device_parts.push_back(split.device_part);
    state.server_parts.push_back(split.server_part);
    state.device_states.push_back(AdamState::for_model(split.device_part));
    state.server_states.push_back(AdamState::for_model(split.server_part));
    state.samplers.emplace_back(data[k].train_indices, root.derive(1000 + k));
    state.data_weights.push_back(static_cast<double>(data[k].train_indices.size()));
  }
  return state;
}

RoundMetrics run_global_round(TrainState& state, const Scenario& scenario,
                              std::span<const DeviceData> data, const TrainConfig& cfg,
                              bool average_device_side) {
  const std::size_t n = data.size();
  if (state.device_parts.size() != n)
    throw validation_error("train state does not match device data count");
  const std::size_t local_steps = static_cast<std::size_t>(scenario.server.local_steps);

  std::vector<double> device_loss(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t step = 0; step < local_steps; ++step) {
      const std::vector<std::size_t> idx = state.samplers[k].next(cfg.batch_size);
      const Matrix batch = data[k].train->gather(idx);
      std::vector<int> labels = data[k].train->gather_labels(idx);
      state.batches_drawn += 1;

      ForwardCache device_cache;
      const ActivationBatch act =
          forward_device(state.device_parts[k], batch, std::move(labels), device_cache);
      ForwardCache server_cache;
      const ServerForward sf = forward_server(state.server_parts[k], act, server_cache);
      device_loss[k] += sf.loss;

      const Matrix act_grad = backward_server(state.server_parts[k], server_cache, act, sf,
                                              state.server_states[k], cfg.adam);
      backward_device(state.device_parts[k], device_cache, act_grad, state.device_states[k],
                      cfg.adam);
      state.local_steps_run += 1;
    }
  }

  const ModelParams averaged_server = fedavg(state.server_parts, state.data_weights);
  AdamState averaged_server_state;
  if (cfg.average_adam_moments)
    averaged_server_state = fedavg_states(state.server_states, state.data_weights);
  else
    averaged_server_state = AdamState::for_model(averaged_server);
  for (std::size_t k = 0; k < n; ++k) {
    state.server_parts[k] = averaged_server;
    state.server_states[k] = averaged_server_state;
  }

  if (average_device_side) {
    const std::vector<double> uniform(n, 1.0);
    const ModelParams averaged_device = fedavg(state.device_parts, uniform);
    AdamState averaged_device_state;
    if (cfg.average_adam_moments)
      averaged_device_state = fedavg_states(state.device_states, uniform);
    else
      averaged_device_state = AdamState::for_model(averaged_device);
    for (std::size_t k = 0; k < n; ++k) {
      state.device_parts[k] = averaged_device;
      state.device_states[k] = averaged_device_state;
    }
  }

  RoundMetrics metrics;
  metrics.round = state.round;
  double weighted_loss = 0.0;
  double total_weight = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    weighted_loss += state.data_weights[k] * (device_loss[k] / static_cast<double>(local_steps));
    total_weight += state.data_weights[k];
  }
  metrics.global_loss = weighted_loss / total_weight;
  const EvalResult eval = evaluate(state.device_parts, averaged_server, data);
  metrics.per_device_acc = eval.per_device;
  metrics.mean_val_acc = eval.mean;
  metrics.sim_time_s = state.round_time_s;
  state.round += 1;
  return metrics;
}

namespace {

TrainingRecord run_training(const Scenario& scenario, std::span<const DeviceData> data,
                            const ModelConfig& model_cfg, std::size_t cut_index,
                            const TrainConfig& cfg, std::span<const double> expected_taus,
                            bool average_device_side, const std::string& algorithm) {
  TrainState state = init_train_state(scenario, data, model_cfg, cut_index, cfg, expected_taus);
  TrainingRecord record;
  record.algorithm = algorithm;
  for (std::size_t round = 0; round < cfg.rounds; ++round)
    record.rounds.push_back(run_global_round(state, scenario, data, cfg, average_device_side));
  record.local_steps_run = state.local_steps_run;
  record.batches_drawn = state.batches_drawn;
  return record;
}

}  // namespace

TrainingRecord train_personalized(const Scenario& scenario, std::span<const DeviceData> data,
                                  const ModelConfig& model_cfg, std::size_t cut_index,
                                  const TrainConfig& cfg, std::span<const double> expected_taus) {
  return run_training(scenario, data, model_cfg, cut_index, cfg, expected_taus,
                      /*average_device_side=*/false, "personalized");
}

TrainingRecord train_splitfed(const Scenario& scenario, std::span<const DeviceData> data,
                              const ModelConfig& model_cfg, std::size_t cut_index,
                              const TrainConfig& cfg, std::span<const double> expected_taus) {
  return run_training(scenario, data, model_cfg, cut_index, cfg, expected_taus,
                      /*average_device_side=*/true, "splitfed");
}

}  // namespace splitbargain
