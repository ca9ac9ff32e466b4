#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splitbargain/errors.hpp"
#include "splitbargain/rng.hpp"

namespace splitbargain {

/// Per-device physical and economic parameters.
struct DeviceProfile {
  int id = 0;
  double cpu_freq_hz = 2.0e9;          // f_k
  double cycles_per_sample = 1.0e3;    // L_k
  std::size_t num_samples = 5500;      // D_k
  double tx_power_watt = 0.1;          // P_k
  double payoff_rate = 5.5e-8;         // c_k, reward per Hz of committed compute
  double privacy_weight = 27.5;        // lambda_k
  std::array<double, 2> position_m = {0.0, 0.0};
};

/// Server-side parameters shared by all devices.
struct ServerProfile {
  double cpu_freq_hz = 4.0e9;               // f_S
  double cycles_per_sample = 1.0e3;          // L_S
  double budget = 1215.0;                    // B
  double time_energy_balance = 0.01;         // gamma in [0,1]
  double bandwidth_hz = 1.0e7;               // W per device
  double noise_psd_watt_per_hz = 0.0;        // N_0, linear watts/Hz
  double capacitance_coeff = 2.0e-28;        // kappa
  int local_steps = 25;                      // I
  double payload_bits_per_step = 0.0;        // bits uploaded per local step
  /// Extra multiplier on the device training energy inside the utilities
  /// (e.g. set it to the model parameter count to scale the energy with the
  /// model size). 1 leaves the plain energy model in place.
  double compute_scale = 1.0;
};

/// dBm/Hz -> linear watts/Hz.
double dbm_per_hz_to_watt(double dbm_per_hz);

/// Default uplink payload per local step: a batch of 256 32-bit activations of
/// width 155 (the trunk width of the default architecture) plus one byte of
/// label per sample.
double default_payload_bits(std::size_t batch_size = 256, std::size_t cut_width = 155);

/// A full experiment configuration: devices, server, geometry, seed.
/// Immutable by convention once built; regenerable bit-for-bit from the seed.
struct Scenario {
  std::vector<DeviceProfile> devices;
  ServerProfile server;
  double area_side_m = 50.0;
  double pathloss_exponent = 4.0;
  std::uint64_t rng_seed = 1;

  std::size_t n_devices() const { return devices.size(); }
  std::array<double, 2> server_position() const { return {area_side_m / 2.0, area_side_m / 2.0}; }
  double device_distance_m(std::size_t k) const;
  std::size_t total_samples() const;

  /// Throws validation_error naming the offending field.
  void validate() const;
};

/// Closed interval for sampled parameters.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Distribution ranges and fixed values from which a Scenario is drawn.
/// Defaults reproduce the reference setting: 10 devices over a 50 m square,
/// f_k ~ U(1.5, 2.4) GHz, lambda_k ~ U(25, 30), c_k ~ U(1e-8, 1e-7),
/// P_k = 100 mW, W = 10 MHz, N_0 = -174 dBm/Hz, kappa = 2e-28, L_k = L_S = 1e3,
/// f_S = 4 GHz, B = 1215, gamma = 0.01, I = 25.
struct ScenarioSpec {
  std::size_t n_devices = 10;
  double area_side_m = 50.0;
  double pathloss_exponent = 4.0;
  std::uint64_t seed = 1;

  Range cpu_freq_hz{1.5e9, 2.4e9};
  Range privacy_weight{25.0, 30.0};
  Range payoff_rate{1.0e-8, 1.0e-7};

  double tx_power_watt = 0.1;
  double cycles_per_sample_device = 1.0e3;
  std::size_t samples_per_device = 5500;  // D_k before any partition override

  double server_cpu_freq_hz = 4.0e9;
  double cycles_per_sample_server = 1.0e3;
  double budget = 1215.0;
  double gamma = 0.01;
  double bandwidth_hz = 1.0e7;
  double noise_psd_watt_per_hz = dbm_per_hz_to_watt(-174.0);
  double kappa = 2.0e-28;
  double compute_scale = 1.0;
  int local_steps = 25;
  double payload_bits_per_step = default_payload_bits();
};

/// Draws a Scenario from the spec. Each parameter family uses its own derived
/// random stream, so e.g. changing the privacy_weight range leaves every other
/// sampled value of the same seed untouched. Throws validation_error for
/// invalid ranges (lo > hi) or n_devices == 0.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Parses the flat key/value config format (see save_scenario_spec for the
/// canonical layout) and generates the Scenario it describes. Missing optional
/// keys fall back to the ScenarioSpec defaults. Throws parse_error with
/// line/key context, validation_error for invariant violations.
Scenario load_scenario(const std::filesystem::path& path);

/// Parses the config file into a ScenarioSpec without generating.
ScenarioSpec load_scenario_spec(const std::filesystem::path& path);

/// Writes the canonical config file:
///   seed = ...
///   [area]    area_side_m, pathloss_exponent
///   [devices] n_devices, cpu_freq_ghz_range, privacy_weight_range,
///             payoff_rate_range, tx_power_mw, cycles_per_sample_device
///   [server]  server_cpu_freq_ghz, cycles_per_sample_server, budget, gamma,
///             bandwidth_mhz, noise_dbm_per_hz, kappa, local_steps
void save_scenario_spec(const ScenarioSpec& spec, const std::filesystem::path& path);

}  // namespace splitbargain
