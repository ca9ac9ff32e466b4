#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splitbargain/data.hpp"
#include "splitbargain/nn.hpp"
#include "splitbargain/rng.hpp"
#include "splitbargain/scenario.hpp"

namespace splitbargain {

struct ModelConfig {
  std::size_t input_width = kDefaultInputWidth;
  std::vector<std::size_t> hidden_widths = default_hidden_widths();
  std::size_t n_classes = kDefaultClasses;
};

struct TrainConfig {
  std::size_t rounds = 30;
  std::size_t batch_size = 256;
  AdamConfig adam{};  // learning rate 0.01
  /// After a FedAvg the Adam moments are averaged with the same weights;
  /// false resets them (and the step count) instead.
  bool average_adam_moments = true;
  std::uint64_t seed = 1;
};

/// A device's slice of the training and validation sets (non-owning views).
struct DeviceData {
  const Dataset* train = nullptr;
  std::vector<std::size_t> train_indices;
  const Dataset* val = nullptr;
  std::vector<std::size_t> val_indices;
};

/// Convenience binding of a train/val dataset pair through their partitions.
std::vector<DeviceData> bind_partitions(const Dataset& train, const Partition& train_partition,
                                        const Dataset& val, const Partition& val_partition);

/// Without-replacement epochs, reshuffled between them. A batch that exhausts
/// the current epoch keeps filling from the next one, so every batch has the
/// configured size even when a device holds fewer samples than one batch.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, RngStream rng)
      : order_(std::move(indices)), rng_(std::move(rng)) {
    rng_.shuffle(order_);
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      batch.push_back(order_[cursor_++]);
    }
    return batch;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  RngStream rng_;
};

/// Everything that evolves across global rounds: per-device split replicas,
/// optimizer states and batch streams. Server-side replicas are identical
/// right after every round (FedAvg broadcast).
struct TrainState {
  std::vector<ModelParams> device_parts;
  std::vector<ModelParams> server_parts;
  std::vector<AdamState> device_states;
  std::vector<AdamState> server_states;
  std::vector<BatchSampler> samplers;
  std::vector<double> data_weights;  // D_k, the FedAvg weights
  double alpha = 0.0;                // device-side parameter fraction of the cut
  double round_time_s = 0.0;
  std::size_t round = 0;
  std::size_t local_steps_run = 0;
  std::size_t batches_drawn = 0;
};

struct RoundMetrics {
  std::size_t round = 0;
  double global_loss = 0.0;  // sample-weighted mean of the per-device batch losses
  double mean_val_acc = 0.0;
  std::vector<double> per_device_acc;
  double sim_time_s = 0.0;
};

struct TrainingRecord {
  std::string algorithm;
  std::vector<RoundMetrics> rounds;
  std::size_t local_steps_run = 0;
  std::size_t batches_drawn = 0;

  /// Columns: round, global_loss, mean_val_acc, per_device_acc_0..N-1, sim_time_s.
  void write_csv(const std::filesystem::path& path) const;
};

/// Simulated wall-clock of one global round at the given split fraction:
/// T_S(alpha) + max_k T_k(alpha) + I * max_k E[tau_k].
double simulate_round_time(const Scenario& scenario, double alpha,
                           std::span<const double> expected_taus);

struct EvalResult {
  std::vector<double> per_device;
  double mean = 0.0;  // weighted by per-device validation sample counts
};

/// Per-device accuracy of (device model composed with the shared server model)
/// on that device's validation slice.
EvalResult evaluate(std::span<const ModelParams> device_parts, const ModelParams& server_part,
                    std::span<const DeviceData> data, std::size_t batch_size = 512);

/// Builds the initial replicas: one seeded model, split at cut_index, copied to
/// every device. Throws validation_error on empty partitions or count
/// mismatches.
TrainState init_train_state(const Scenario& scenario, std::span<const DeviceData> data,
                            const ModelConfig& model_cfg, std::size_t cut_index,
                            const TrainConfig& cfg, std::span<const double> expected_taus);

/// One global round: every device runs scenario.server.local_steps mini-batch
/// steps through its split replica, then the server-side replicas are FedAvg'd
/// with weights D_k and broadcast. With average_device_side the device-side
/// models are also averaged (uniform 1/N weights) and broadcast.
RoundMetrics run_global_round(TrainState& state, const Scenario& scenario,
                              std::span<const DeviceData> data, const TrainConfig& cfg,
                              bool average_device_side);

/// Personalized split training: device-side models are never averaged.
TrainingRecord train_personalized(const Scenario& scenario, std::span<const DeviceData> data,
                                  const ModelConfig& model_cfg, std::size_t cut_index,
                                  const TrainConfig& cfg, std::span<const double> expected_taus);

/// Baseline: both halves are averaged every round.
TrainingRecord train_splitfed(const Scenario& scenario, std::span<const DeviceData> data,
                              const ModelConfig& model_cfg, std::size_t cut_index,
                              const TrainConfig& cfg, std::span<const double> expected_taus);

}  // namespace splitbargain
