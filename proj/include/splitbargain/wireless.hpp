#pragma once

#include <cstddef>
#include <functional>

#include "splitbargain/rng.hpp"
#include "splitbargain/scenario.hpp"

namespace splitbargain {

/// One draw of the uplink channel: linear power gain h_k (dimensionless).
struct ChannelSample {
  double gain = 0.0;
};

/// Monte Carlo estimate of the expected upload time E[tau_k].
struct TauEstimate {
  double mean_s = 0.0;
  double std_error_s = 0.0;
  std::size_t n_samples = 0;
};

/// Rayleigh-faded pathloss channel: gain = g * d^(-exponent) with g ~ Exp(1)
/// (unit-mean exponential power gain). Throws degenerate_geometry_error when
/// the device sits exactly on the server.
ChannelSample sample_channel(const DeviceProfile& device, const Scenario& scenario, RngStream& rng);

/// Shannon rate W * log2(1 + P_k h / (N_0 W)) in bits/s.
double achievable_rate(const ChannelSample& channel, const DeviceProfile& device,
                       const ServerProfile& server);

/// payload / rate. Throws infinite_latency_error when rate == 0 and payload > 0.
double upload_time_s(double payload_bits, double rate_bps);

/// E^U_k = tau_k * P_k.
double upload_energy_j(double tau_s, const DeviceProfile& device);

/// Draws below this gain are resampled in the Monte Carlo expectation; the
/// expectation of 1/log2(1+SNR) has no closed form and a heavy tail at h -> 0.
inline constexpr double kGainTruncation = 1e-12;

/// Monte Carlo mean of upload_time over n independent channel draws, gains
/// below the truncation threshold resampled. Standard error reported.
TauEstimate expected_upload_time(const DeviceProfile& device, const Scenario& scenario,
                                 std::size_t n_samples, RngStream& rng,
                                 double gain_truncation = kGainTruncation);

/// Same estimator with an injectable gain sampler (used for degenerate
/// distributions in tests and for alternative fading assumptions).
TauEstimate expected_upload_time(const DeviceProfile& device, const Scenario& scenario,
                                 std::size_t n_samples, const std::function<double()>& gain_sampler,
                                 double gain_truncation = kGainTruncation);

/// Expected upload times for every device in index order, one derived random
/// stream per device (stream id = device index).
std::vector<double> expected_upload_times(const Scenario& scenario, std::size_t n_samples,
                                          RngStream& rng,
                                          double gain_truncation = kGainTruncation);

}  // namespace splitbargain
