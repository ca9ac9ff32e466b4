#include "splitbargain/wireless.hpp"

#include <cmath>

#include "splitbargain/errors.hpp"

namespace splitbargain {

ChannelSample sample_channel(const DeviceProfile& device, const Scenario& scenario, RngStream& rng) {
  const double d = scenario.device_distance_m(static_cast<std::size_t>(device.id));
  if (d <= 0.0)
    throw degenerate_geometry_error("device " + std::to_string(device.id) +
                                    " is at zero distance from the server");
  const double fading = rng.exponential_mean1();
  return ChannelSample{fading * std::pow(d, -scenario.pathloss_exponent)};
}

double achievable_rate(const ChannelSample& channel, const DeviceProfile& device,
                       const ServerProfile& server) {
  const double snr =
      device.tx_power_watt * channel.gain / (server.noise_psd_watt_per_hz * server.bandwidth_hz);
  return server.bandwidth_hz * std::log2(1.0 + snr);
}

double upload_time_s(double payload_bits, double rate_bps) {
  if (payload_bits == 0.0) return 0.0;
  if (rate_bps <= 0.0)
    throw infinite_latency_error("upload rate is 0 b/s; transmission never completes");
  return payload_bits / rate_bps;
}

double upload_energy_j(double tau_s, const DeviceProfile& device) {
  return tau_s * device.tx_power_watt;
}

TauEstimate expected_upload_time(const DeviceProfile& device, const Scenario& scenario,
                                 std::size_t n_samples, const std::function<double()>& gain_sampler,
                                 double gain_truncation) {
  if (n_samples < 1) throw validation_error("n_samples: must be >= 1");
  const double payload = scenario.server.payload_bits_per_step;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double gain = gain_sampler();
    while (gain < gain_truncation) gain = gain_sampler();
    const double rate = achievable_rate(ChannelSample{gain}, device, scenario.server);
    const double tau = upload_time_s(payload, rate);
    sum += tau;
    sum_sq += tau * tau;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  double se = 0.0;
  if (n_samples > 1) {
    const double var = (sum_sq - n * mean * mean) / (n - 1.0);
    se = std::sqrt(std::max(var, 0.0) / n);
  }
  return TauEstimate{mean, se, n_samples};
}

TauEstimate expected_upload_time(const DeviceProfile& device, const Scenario& scenario,
                                 std::size_t n_samples, RngStream& rng, double gain_truncation) {
  const double d = scenario.device_distance_m(static_cast<std::size_t>(device.id));
  if (d <= 0.0)
    throw degenerate_geometry_error("device " + std::to_string(device.id) +
                                    " is at zero distance from the server");
  const double pathloss = std::pow(d, -scenario.pathloss_exponent);
  return expected_upload_time(
      device, scenario, n_samples,
      [&rng, pathloss]() { return rng.exponential_mean1() * pathloss; }, gain_truncation);
}

std::vector<double> expected_upload_times(const Scenario& scenario, std::size_t n_samples,
                                          RngStream& rng, double gain_truncation) {
  std::vector<double> taus;
  taus.reserve(scenario.n_devices());
  for (std::size_t k = 0; k < scenario.n_devices(); ++k) {
    RngStream stream = rng.derive(k);
    taus.push_back(
        expected_upload_time(scenario.devices[k], scenario, n_samples, stream, gain_truncation)
            .mean_s);
  }
  return taus;
}

}  // namespace splitbargain
