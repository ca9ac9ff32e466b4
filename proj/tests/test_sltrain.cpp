#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "splitbargain/cost_utility.hpp"
#include "splitbargain/sltrain.hpp"

using namespace splitbargain;

namespace {

Scenario small_scenario(std::size_t n_devices, int local_steps) {
  ScenarioSpec spec;
  spec.n_devices = n_devices;
  spec.seed = 7;
  spec.local_steps = local_steps;
  Scenario sc = generate_scenario(spec);
  return sc;
}

// Even split of a dataset across devices (iid), val bound to the same slices
// of a second dataset.
std::vector<DeviceData> iid_data(const Dataset& train, const Dataset& val,
                                 std::size_t n_devices) {
  std::vector<DeviceData> data(n_devices);
  for (std::size_t k = 0; k < n_devices; ++k) {
    data[k].train = &train;
    data[k].val = &val;
    for (std::size_t i = k; i < train.size(); i += n_devices) data[k].train_indices.push_back(i);
    for (std::size_t i = k; i < val.size(); i += n_devices) data[k].val_indices.push_back(i);
  }
  return data;
}

ModelConfig tiny_model(std::size_t width, std::size_t classes) {
  ModelConfig cfg;
  cfg.input_width = width;
  cfg.hidden_widths = {16, 16};
  cfg.n_classes = classes;
  return cfg;
}

bool models_equal(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].weights != b.layers[i].weights || a.layers[i].bias != b.layers[i].bias)
      return false;
  return true;
}

bool records_equal(const TrainingRecord& a, const TrainingRecord& b) {
  if (a.rounds.size() != b.rounds.size()) return false;
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    if (a.rounds[r].global_loss != b.rounds[r].global_loss) return false;
    if (a.rounds[r].mean_val_acc != b.rounds[r].mean_val_acc) return false;
    if (a.rounds[r].per_device_acc != b.rounds[r].per_device_acc) return false;
    if (a.rounds[r].sim_time_s != b.rounds[r].sim_time_s) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a single participant trains identically under both algorithms") {
  const Scenario sc = small_scenario(1, 5);
  const Dataset train = synth_dataset(120, 4, 8, 3, 2.0);
  const Dataset val = synth_dataset(40, 4, 8, 4, 2.0);
  const auto data = iid_data(train, val, 1);
  const std::vector<double> taus{1e-3};
  TrainConfig cfg;
  cfg.rounds = 4;
  cfg.batch_size = 16;
  cfg.seed = 5;

  const TrainingRecord personalized =
      train_personalized(sc, data, tiny_model(8, 4), 1, cfg, taus);
  const TrainingRecord splitfed = train_splitfed(sc, data, tiny_model(8, 4), 1, cfg, taus);
  CHECK(records_equal(personalized, splitfed));
}

TEST_CASE("training is deterministic per seed") {
  const Scenario sc = small_scenario(3, 4);
  const Dataset train = synth_dataset(300, 5, 8, 11, 1.5);
  const Dataset val = synth_dataset(90, 5, 8, 12, 1.5);
  const auto data = iid_data(train, val, 3);
  const std::vector<double> taus{1e-3, 2e-3, 3e-3};
  TrainConfig cfg;
  cfg.rounds = 3;
  cfg.batch_size = 20;
  cfg.seed = 17;

  const TrainingRecord a = train_personalized(sc, data, tiny_model(8, 5), 1, cfg, taus);
  const TrainingRecord b = train_personalized(sc, data, tiny_model(8, 5), 1, cfg, taus);
  CHECK(records_equal(a, b));

  TrainConfig other = cfg;
  other.seed = 18;
  const TrainingRecord c = train_personalized(sc, data, tiny_model(8, 5), 1, other, taus);
  CHECK_FALSE(records_equal(a, c));
}

TEST_CASE("iid separable task reaches high validation accuracy") {
  const Scenario sc = small_scenario(2, 10);
  const Dataset train = synth_dataset(400, 4, 8, 21, 4.0);
  const Dataset val = synth_dataset(120, 4, 8, 22, 4.0);
  const auto data = iid_data(train, val, 2);
  const std::vector<double> taus{1e-3, 1e-3};
  TrainConfig cfg;
  cfg.rounds = 10;
  cfg.batch_size = 32;
  cfg.seed = 9;

  const TrainingRecord record = train_personalized(sc, data, tiny_model(8, 4), 1, cfg, taus);
  CHECK(record.rounds.back().mean_val_acc >= 0.95);
  // Monotone trend: later half at least as good as the first round.
  CHECK(record.rounds.back().mean_val_acc >= record.rounds.front().mean_val_acc);
}

TEST_CASE("server replicas are bitwise identical after every round") {
  const Scenario sc = small_scenario(3, 3);
  const Dataset train = synth_dataset(240, 4, 8, 31, 1.5);
  const Dataset val = synth_dataset(60, 4, 8, 32, 1.5);
  const auto data = iid_data(train, val, 3);
  const std::vector<double> taus{1e-3, 2e-3, 3e-3};
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 3;

  TrainState state = init_train_state(sc, data, tiny_model(8, 4), 1, cfg, taus);
  for (int round = 0; round < 3; ++round) {
    run_global_round(state, sc, data, cfg, /*average_device_side=*/false);
    for (std::size_t k = 1; k < 3; ++k)
      REQUIRE(models_equal(state.server_parts[0], state.server_parts[k]));
    // Personalized keeps the device sides apart (different data).
    CHECK_FALSE(models_equal(state.device_parts[0], state.device_parts[1]));
  }
}

TEST_CASE("splitfed broadcasts one shared device model") {
  const Scenario sc = small_scenario(3, 3);
  const Dataset train = synth_dataset(240, 4, 8, 41, 1.5);
  const Dataset val = synth_dataset(60, 4, 8, 42, 1.5);
  const auto data = iid_data(train, val, 3);
  const std::vector<double> taus{1e-3, 2e-3, 3e-3};
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 3;

  TrainState state = init_train_state(sc, data, tiny_model(8, 4), 1, cfg, taus);
  run_global_round(state, sc, data, cfg, /*average_device_side=*/true);
  for (std::size_t k = 1; k < 3; ++k)
    REQUIRE(models_equal(state.device_parts[0], state.device_parts[k]));
}

TEST_CASE("a device's first-round updates are isolated from other devices' data") {
  const Scenario sc = small_scenario(2, 5);
  const Dataset train_a = synth_dataset(200, 4, 8, 51, 1.5);
  Dataset train_b = train_a;
  // Device 1 sees different data in run B; device 0's slice is untouched.
  for (std::size_t i = 1; i < train_b.size(); i += 2)
    for (std::size_t j = 0; j < train_b.width; ++j)
      train_b.pixels[i * train_b.width + j] = 1.0f - train_b.pixels[i * train_b.width + j];
  const Dataset val = synth_dataset(40, 4, 8, 52, 1.5);

  const auto data_a = iid_data(train_a, val, 2);
  const auto data_b = iid_data(train_b, val, 2);
  const std::vector<double> taus{1e-3, 2e-3};
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 13;

  TrainState state_a = init_train_state(sc, data_a, tiny_model(8, 4), 1, cfg, taus);
  TrainState state_b = init_train_state(sc, data_b, tiny_model(8, 4), 1, cfg, taus);
  run_global_round(state_a, sc, data_a, cfg, false);
  run_global_round(state_b, sc, data_b, cfg, false);

  // Within the first round nothing from device 1 can reach device 0.
  CHECK(models_equal(state_a.device_parts[0], state_b.device_parts[0]));
  CHECK_FALSE(models_equal(state_a.device_parts[1], state_b.device_parts[1]));

  // From round two on, device 1's data flows into device 0 through the
  // averaged server model; that path is legitimate.
  run_global_round(state_a, sc, data_a, cfg, false);
  run_global_round(state_b, sc, data_b, cfg, false);
  CHECK_FALSE(models_equal(state_a.device_parts[0], state_b.device_parts[0]));
}

TEST_CASE("global loss is the sample-weighted mean of per-device batch losses") {
  Scenario sc = small_scenario(2, 1);  // one local step
  const Dataset train = synth_dataset(60, 3, 6, 61, 1.5);
  const Dataset val = synth_dataset(30, 3, 6, 62, 1.5);
  std::vector<DeviceData> data(2);
  data[0].train = data[1].train = &train;
  data[0].val = data[1].val = &val;
  for (std::size_t i = 0; i < 40; ++i) data[0].train_indices.push_back(i);
  for (std::size_t i = 40; i < 60; ++i) data[1].train_indices.push_back(i);
  for (std::size_t i = 0; i < 30; ++i) data[0].val_indices.push_back(i);
  data[1].val_indices = data[0].val_indices;

  const std::vector<double> taus{1e-3, 2e-3};
  TrainConfig cfg;
  cfg.batch_size = 64;  // covers each device's whole slice in the single step
  cfg.seed = 23;
  const ModelConfig model_cfg = tiny_model(6, 3);

  TrainState state = init_train_state(sc, data, model_cfg, 1, cfg, taus);
  const RoundMetrics metrics = run_global_round(state, sc, data, cfg, false);

  // Replicate each device's first batch draw (same derived stream) and score
  // it with the double-precision reference on the shared initial model.
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, cfg.seed);
  std::vector<double> per_device_loss;
  for (std::size_t k = 0; k < 2; ++k) {
    BatchSampler sampler(data[k].train_indices, RngStream(cfg.seed).derive(1000 + k));
    const auto idx = sampler.next(cfg.batch_size);
    per_device_loss.push_back(oracles::reference_loss_of_model(
        model, train.gather(idx), train.gather_labels(idx)));
  }
  const double expected = (40.0 * per_device_loss[0] + 20.0 * per_device_loss[1]) / 60.0;
  CHECK(metrics.global_loss == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("round, step and batch counters match the configuration") {
  const Scenario sc = small_scenario(3, 4);
  const Dataset train = synth_dataset(150, 3, 6, 71, 1.5);
  const Dataset val = synth_dataset(30, 3, 6, 72, 1.5);
  const auto data = iid_data(train, val, 3);
  const std::vector<double> taus{1e-3, 1e-3, 1e-3};
  TrainConfig cfg;
  cfg.rounds = 5;
  cfg.batch_size = 8;
  cfg.seed = 2;

  const TrainingRecord record = train_personalized(sc, data, tiny_model(6, 3), 1, cfg, taus);
  CHECK(record.rounds.size() == 5);
  CHECK(record.local_steps_run == 5 * 3 * 4);
  CHECK(record.batches_drawn == 5 * 3 * 4);
  for (std::size_t r = 0; r < record.rounds.size(); ++r) CHECK(record.rounds[r].round == r);
}

TEST_CASE("an untrained model scores at chance level on balanced data") {
  const Scenario sc = small_scenario(1, 1);
  const Dataset val = synth_dataset(3000, 10, 16, 81, 1.0);
  std::vector<DeviceData> data(1);
  data[0].val = &val;
  for (std::size_t i = 0; i < val.size(); ++i) data[0].val_indices.push_back(i);
  data[0].train = &val;
  data[0].train_indices = data[0].val_indices;

  const ModelConfig model_cfg = tiny_model(16, 10);
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, 99);
  const SplitModel split = split_at(model, 1);
  const std::vector<ModelParams> device_parts{split.device_part};
  const EvalResult result = evaluate(device_parts, split.server_part, data);
  CHECK(result.mean == doctest::Approx(0.1).epsilon(0.3));  // 0.1 +- 0.03
}

TEST_CASE("a memorized tiny dataset evaluates at accuracy 1") {
  const Scenario sc = small_scenario(1, 25);
  const Dataset train = synth_dataset(32, 4, 8, 91, 2.0);
  std::vector<DeviceData> data(1);
  data[0].train = &train;
  data[0].val = &train;  // evaluate on the memorized set
  for (std::size_t i = 0; i < train.size(); ++i) {
    data[0].train_indices.push_back(i);
    data[0].val_indices.push_back(i);
  }
  const std::vector<double> taus{1e-3};
  TrainConfig cfg;
  cfg.rounds = 8;
  cfg.batch_size = 32;
  cfg.seed = 6;

  const TrainingRecord record = train_personalized(sc, data, tiny_model(8, 4), 1, cfg, taus);
  CHECK(record.rounds.back().mean_val_acc == 1.0);
}

TEST_CASE("evaluation weighting follows the validation sample counts") {
  // Device 0 holds 3 samples the model classifies correctly, device 1 holds
  // one it misses: accuracies (1, 0), sizes (3, 1), weighted mean 0.75.
  const ModelConfig model_cfg = tiny_model(8, 4);
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, 123);
  const SplitModel split = split_at(model, 1);
  const Dataset pool = synth_dataset(400, 4, 8, 101, 3.0);

  const std::vector<ModelParams> parts{split.device_part, split.device_part};
  std::vector<std::size_t> correct_idx, wrong_idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::vector<std::size_t> one{i};
    const Matrix x = pool.gather(one);
    const Matrix h = forward_part(split.device_part, x, nullptr);
    const Matrix logits = forward_part(split.server_part, h, nullptr);
    if (predict_classes(logits)[0] == pool.labels[i]) {
      if (correct_idx.size() < 3) correct_idx.push_back(i);
    } else if (wrong_idx.empty()) {
      wrong_idx.push_back(i);
    }
  }
  REQUIRE(correct_idx.size() == 3);
  REQUIRE(wrong_idx.size() == 1);

  std::vector<DeviceData> data(2);
  data[0].val = data[1].val = &pool;
  data[0].val_indices = correct_idx;
  data[1].val_indices = wrong_idx;
  data[0].train = data[1].train = &pool;
  data[0].train_indices = correct_idx;
  data[1].train_indices = wrong_idx;

  const EvalResult result = evaluate(parts, split.server_part, data);
  CHECK(result.per_device[0] == 1.0);
  CHECK(result.per_device[1] == 0.0);
  CHECK(result.mean == 0.75);
}

TEST_CASE("simulated round time composes the three delay terms") {
  ScenarioSpec spec;
  spec.seed = 12;
  const Scenario sc = generate_scenario(spec);
  RngStream rng(12);
  std::vector<double> taus;
  for (std::size_t k = 0; k < sc.n_devices(); ++k) taus.push_back(rng.uniform(1e-4, 1e-2));
  const double max_tau = *std::max_element(taus.begin(), taus.end());

  // alpha = 0: no device compute term.
  CHECK(simulate_round_time(sc, 0.0, taus) ==
        doctest::Approx(server_compute_time(SplitFraction{0.0}, sc) +
                        sc.server.local_steps * max_tau));
  // alpha = 1: no server compute term.
  double max_device = 0.0;
  for (const auto& d : sc.devices)
    max_device = std::max(max_device, device_compute_time(SplitFraction{1.0}, d));
  CHECK(simulate_round_time(sc, 1.0, taus) ==
        doctest::Approx(max_device + sc.server.local_steps * max_tau));
  // Interior alpha: recomposition.
  double max_device_mid = 0.0;
  for (const auto& d : sc.devices)
    max_device_mid = std::max(max_device_mid, device_compute_time(SplitFraction{0.4}, d));
  CHECK(simulate_round_time(sc, 0.4, taus) ==
        doctest::Approx(server_compute_time(SplitFraction{0.4}, sc) + max_device_mid +
                        sc.server.local_steps * max_tau));
}

TEST_CASE("empty partitions are rejected") {
  const Scenario sc = small_scenario(2, 2);
  const Dataset train = synth_dataset(50, 3, 6, 111, 1.5);
  std::vector<DeviceData> data(2);
  data[0].train = data[1].train = &train;
  for (std::size_t i = 0; i < 50; ++i) data[0].train_indices.push_back(i);
  // device 1 left empty
  const std::vector<double> taus{1e-3, 1e-3};
  TrainConfig cfg;
  CHECK_THROWS_AS(train_personalized(sc, data, tiny_model(6, 3), 1, cfg, taus),
                  validation_error);
}
