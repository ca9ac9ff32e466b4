#include "splitbargain/cost_utility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "splitbargain/errors.hpp"

namespace splitbargain {

namespace {

double comm_delay(std::span<const double> taus, CommDelayMode mode) {
  if (taus.empty()) throw validation_error("expected_taus: must not be empty");
  if (mode == CommDelayMode::kSlowestDevice) return *std::max_element(taus.begin(), taus.end());
  double sum = 0.0;
  for (double t : taus) sum += t;
  return sum / static_cast<double>(taus.size());
}

}  // namespace

double device_compute_energy(SplitFraction alpha, const DeviceProfile& device, double kappa) {
  return kappa * alpha.alpha * static_cast<double>(device.num_samples) * device.cycles_per_sample *
         device.cpu_freq_hz * device.cpu_freq_hz;
}

double device_compute_time(SplitFraction alpha, const DeviceProfile& device) {
  return alpha.alpha * device.cycles_per_sample * static_cast<double>(device.num_samples) /
         device.cpu_freq_hz;
}

double server_compute_energy(SplitFraction alpha, const Scenario& scenario) {
  const ServerProfile& s = scenario.server;
  double sum_samples = 0.0;
  for (const auto& d : scenario.devices) sum_samples += static_cast<double>(d.num_samples);
  return sum_samples * (1.0 - alpha.alpha) * s.capacitance_coeff * s.cycles_per_sample *
         s.cpu_freq_hz * s.cpu_freq_hz;
}

double server_compute_time(SplitFraction alpha, const Scenario& scenario) {
  const ServerProfile& s = scenario.server;
  double max_samples = 0.0;
  for (const auto& d : scenario.devices)
    max_samples = std::max(max_samples, static_cast<double>(d.num_samples));
  return max_samples * (1.0 - alpha.alpha) * s.cycles_per_sample / s.cpu_freq_hz;
}

double device_utility(SplitFraction alpha, const DeviceProfile& device, const ServerProfile& server,
                      double expected_tau_k, double kappa) {
  const double reward = device.payoff_rate * device.cpu_freq_hz;
  const double upload_energy = expected_tau_k * device.tx_power_watt;
  const double energy =
      device_compute_energy(alpha, device, kappa) + server.local_steps * upload_energy;
  const double privacy = device.privacy_weight * std::log2(1.0 + alpha.alpha);
  return reward - energy + privacy;
}

double server_utility(SplitFraction alpha, const Scenario& scenario,
                      std::span<const double> expected_taus, CommDelayMode mode) {
  const ServerProfile& s = scenario.server;
  double payoff = 0.0;
  double max_device_time = 0.0;
  for (const auto& d : scenario.devices) {
    payoff += d.payoff_rate * d.cpu_freq_hz;
    max_device_time = std::max(max_device_time, device_compute_time(alpha, d));
  }
  const double energy = server_compute_energy(alpha, scenario);
  const double elapsed = server_compute_time(alpha, scenario) + max_device_time +
                         s.local_steps * comm_delay(expected_taus, mode);
  return s.budget - (payoff + s.time_energy_balance * energy +
                     (1.0 - s.time_energy_balance) * elapsed);
}

double server_utility_slope(const Scenario& scenario) {
  const ServerProfile& s = scenario.server;
  double sum_samples = 0.0;
  double max_server_per_alpha = 0.0;  // (L_S / f_S) * max_k D_k
  double max_device_per_alpha = 0.0;  // max_k L_k D_k / f_k
  for (const auto& d : scenario.devices) {
    const double samples = static_cast<double>(d.num_samples);
    sum_samples += samples;
    max_server_per_alpha = std::max(max_server_per_alpha, samples * s.cycles_per_sample / s.cpu_freq_hz);
    max_device_per_alpha =
        std::max(max_device_per_alpha, d.cycles_per_sample * samples / d.cpu_freq_hz);
  }
  const double energy_slope =
      s.time_energy_balance * s.capacitance_coeff * s.cycles_per_sample * s.cpu_freq_hz *
      s.cpu_freq_hz * sum_samples;
  const double time_slope =
      (1.0 - s.time_energy_balance) * (max_server_per_alpha - max_device_per_alpha);
  return energy_slope + time_slope;
}

double ideal_alpha_device(const DeviceProfile& device, double kappa) {
  const double energy_rate = kappa * device.cycles_per_sample *
                             static_cast<double>(device.num_samples) * device.cpu_freq_hz *
                             device.cpu_freq_hz;
  const double alpha_hat = device.privacy_weight / (std::numbers::ln2 * energy_rate) - 1.0;
  return std::clamp(alpha_hat, 0.0, 1.0);
}

double ideal_alpha_server(const Scenario& scenario) {
  return server_utility_slope(scenario) > 0.0 ? 1.0 : 0.0;
}

UtilityVector ideal_point(const Scenario& scenario, std::span<const double> expected_taus,
                          CommDelayMode mode) {
  if (scenario.devices.empty()) throw validation_error("n_devices: must be >= 1");
  if (expected_taus.size() != scenario.n_devices())
    throw validation_error("expected_taus: length must equal n_devices");
  UtilityVector g;
  g.device_utilities.reserve(scenario.n_devices());
  const double kappa = effective_device_kappa(scenario.server);
  for (std::size_t k = 0; k < scenario.n_devices(); ++k) {
    const DeviceProfile& d = scenario.devices[k];
    const SplitFraction best{ideal_alpha_device(d, kappa)};
    g.device_utilities.push_back(device_utility(best, d, scenario.server, expected_taus[k], kappa));
  }
  g.server_utility =
      server_utility(SplitFraction{ideal_alpha_server(scenario)}, scenario, expected_taus, mode);
  return g;
}

UtilityVector utilities_at(SplitFraction alpha, const Scenario& scenario,
                           std::span<const double> expected_taus, CommDelayMode mode) {
  if (expected_taus.size() != scenario.n_devices())
    throw validation_error("expected_taus: length must equal n_devices");
  UtilityVector u;
  u.device_utilities.reserve(scenario.n_devices());
  const double kappa = effective_device_kappa(scenario.server);
  for (std::size_t k = 0; k < scenario.n_devices(); ++k)
    u.device_utilities.push_back(
        device_utility(alpha, scenario.devices[k], scenario.server, expected_taus[k], kappa));
  u.server_utility = server_utility(alpha, scenario, expected_taus, mode);
  return u;
}

}  // namespace splitbargain
