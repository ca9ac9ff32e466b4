#pragma once

#include <optional>
#include <span>
#include <vector>

#include "splitbargain/cost_utility.hpp"
#include "splitbargain/scenario.hpp"

namespace splitbargain {

/// Closed subinterval of [0, 1] of split fractions; absence means empty.
struct AlphaInterval {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint() const { return 0.5 * (lo + hi); }
};

/// One bisection step: the beta that was tested and what came of it.
struct TraceEntry {
  std::size_t iteration = 0;
  double beta = 0.0;
  bool feasible = false;
  std::optional<double> witness_alpha;
};

/// The bargaining game over the split fraction: N device players plus the
/// server, disagreement point phi (all-zero by default, training never starts
/// without an agreement), ideal point g, bisection tolerance epsilon.
struct BargainingProblem {
  const Scenario& scenario;
  std::vector<double> expected_taus;
  UtilityVector ideal;
  UtilityVector disagreement;
  double tolerance = 1e-6;
  CommDelayMode delay_mode = CommDelayMode::kSlowestDevice;
};

/// Builds the problem: computes the ideal point and an all-zero disagreement
/// point. Throws validation_error on length/tolerance violations and
/// bargaining_domain_error if some disagreement component exceeds its ideal.
BargainingProblem make_problem(const Scenario& scenario, std::vector<double> expected_taus,
                               double tolerance = 1e-6,
                               CommDelayMode mode = CommDelayMode::kSlowestDevice);

/// Solver result. utilities_at_alpha are the player utilities at alpha_star;
/// trace records every beta the bisection touched.
struct BargainingOutcome {
  double beta_star = 0.0;
  double alpha_star = 0.0;
  UtilityVector utilities_at_alpha;
  std::size_t iterations = 0;
  std::vector<TraceEntry> trace;
};

/// Endpoint resolution of the interval root finding on the concave device
/// utilities.
inline constexpr double kAlphaResolution = 1e-9;

/// {alpha in [0,1] : U_{d,k}(alpha) >= target}. Concavity of U_{d,k} makes this
/// a closed interval (possibly empty); each endpoint is located by bisection on
/// the monotone side of the clamped maximizer.
std::optional<AlphaInterval> feasible_alpha_interval_device(std::size_t k, double target,
                                                            const BargainingProblem& problem);

/// {alpha in [0,1] : U_S(alpha) >= target}. U_S is affine, so one linear solve
/// yields [a0,1], [0,a0], [0,1] or empty.
std::optional<AlphaInterval> feasible_alpha_interval_server(double target,
                                                            const BargainingProblem& problem);

/// Feasibility of beta: intersects the N+1 per-player intervals for the
/// targets phi_i + beta * (g_i - phi_i). The witness is the intersection
/// midpoint. The simultaneous equality of the reference formulation is relaxed
/// to componentwise >=; at the maximal beta the intersection collapses and the
/// relaxation is tight.
struct FeasibilityResult {
  bool feasible = false;
  std::optional<double> witness_alpha;
};
FeasibilityResult feasibility_test(double beta, const BargainingProblem& problem);

/// Kalai-Smorodinsky solution by bisection on beta in [0, 1]: feasible -> raise
/// beta_min, infeasible -> lower beta_max, stop when the bracket is narrower
/// than the tolerance. Requires a strictly positive ideal point
/// (bargaining_domain_error otherwise); throws solver_error when even beta = 0
/// is infeasible.
BargainingOutcome solve_ksbs(const BargainingProblem& problem);

/// Exhaustive oracle: scans an alpha grid and maximizes
/// min_i (U_i(alpha) - phi_i) / (g_i - phi_i), the scaled-distance
/// characterization of the same solution. grid_resolution must be <= 1e-3.
BargainingOutcome brute_force_ksbs(const BargainingProblem& problem, double grid_resolution);

/// Maps a split fraction onto the block index whose cumulative parameter
/// fraction is closest to alpha; ties break toward the smaller index.
std::size_t cut_layer_from_alpha(double alpha, std::span<const std::size_t> layer_param_counts);

}  // namespace splitbargain
