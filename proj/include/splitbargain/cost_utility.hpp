#pragma once

#include <span>
#include <vector>

#include "splitbargain/scenario.hpp"

namespace splitbargain {

/// Fraction of model parameters held on the device side.
struct SplitFraction {
  double alpha = 0.0;  // in [0, 1]
};

/// Utilities of all N+1 players: devices first, server last.
struct UtilityVector {
  std::vector<double> device_utilities;
  double server_utility = 0.0;

  std::size_t n_players() const { return device_utilities.size() + 1; }
  double player(std::size_t i) const {
    return i < device_utilities.size() ? device_utilities[i] : server_utility;
  }
};

/// How the per-round communication delay term I*E[tau_k] aggregates across
/// devices inside the server utility.
enum class CommDelayMode {
  kSlowestDevice,    // I * max_k E[tau_k]; the server waits for the slowest uplink
  kMeanOverDevices,  // I * mean_k E[tau_k]
};

/// Kappa as seen by the device energy terms of the utilities; compute_scale
/// folds in optional model-size scaling.
inline double effective_device_kappa(const ServerProfile& server) {
  return server.capacitance_coeff * server.compute_scale;
}

/// E^C_k(alpha) = kappa * alpha * D_k * L_k * f_k^2, joules per global round.
double device_compute_energy(SplitFraction alpha, const DeviceProfile& device, double kappa);

/// T_k(alpha) = alpha * L_k * D_k / f_k, seconds.
double device_compute_time(SplitFraction alpha, const DeviceProfile& device);

/// E_S(alpha) = sum_k D_k * (1-alpha) * kappa * L_S * f_S^2, joules.
double server_compute_energy(SplitFraction alpha, const Scenario& scenario);

/// T_S(alpha) = max_k D_k * (1-alpha) * L_S / f_S, seconds (devices are
/// processed in parallel; the slowest replica bounds the round).
double server_compute_time(SplitFraction alpha, const Scenario& scenario);

/// U_{d,k}(alpha) = c_k f_k - (E^C_k(alpha) + I * E^U_k) + lambda_k * log2(1 + alpha).
/// expected_tau_k is the Monte Carlo mean upload time for this device; the
/// upload term does not depend on alpha.
double device_utility(SplitFraction alpha, const DeviceProfile& device, const ServerProfile& server,
                      double expected_tau_k, double kappa);

/// U_S(alpha) = B - [ sum_k c_k f_k + gamma * E_S(alpha)
///                    + (1-gamma) * (T_S(alpha) + max_k T_k(alpha) + I * delay) ],
/// where delay aggregates expected_taus per CommDelayMode.
double server_utility(SplitFraction alpha, const Scenario& scenario,
                      std::span<const double> expected_taus,
                      CommDelayMode mode = CommDelayMode::kSlowestDevice);

/// d U_S / d alpha. U_S is affine in alpha, so this is a constant per scenario:
///   gamma * kappa * L_S * f_S^2 * sum_k D_k
///   + (1-gamma) * [ (L_S / f_S) * max_k D_k - max_k (L_k D_k / f_k) ].
double server_utility_slope(const Scenario& scenario);

/// Unconstrained maximizer of U_{d,k}, clamped to [0, 1]:
///   alpha_hat_k = lambda_k / (ln2 * kappa * L_k * D_k * f_k^2) - 1.
double ideal_alpha_device(const DeviceProfile& device, double kappa);

/// 1 if the affine U_S slope is positive, otherwise 0 (ties resolve to 0:
/// the smaller device burden when the server is indifferent).
double ideal_alpha_server(const Scenario& scenario);

/// g = (U_{d,1}(alpha_hat_1), ..., U_{d,N}(alpha_hat_N), U_S(alpha_hat_S)):
/// each player's utility at its own individually optimal split.
UtilityVector ideal_point(const Scenario& scenario, std::span<const double> expected_taus,
                          CommDelayMode mode = CommDelayMode::kSlowestDevice);

/// All player utilities at a common alpha.
UtilityVector utilities_at(SplitFraction alpha, const Scenario& scenario,
                           std::span<const double> expected_taus,
                           CommDelayMode mode = CommDelayMode::kSlowestDevice);

}  // namespace splitbargain
