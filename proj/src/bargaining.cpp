#include "splitbargain/bargaining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splitbargain/errors.hpp"

namespace splitbargain {

namespace {

double device_utility_at(const BargainingProblem& p, std::size_t k, double alpha) {
  return device_utility(SplitFraction{alpha}, p.scenario.devices[k], p.scenario.server,
                        p.expected_taus[k], effective_device_kappa(p.scenario.server));
}

// Root of U(alpha) = target on a monotone segment [lo, hi] of the concave
// utility. above(lo) != above(hi) must hold; returns an alpha with
// U(alpha) >= target within kAlphaResolution of the crossing.
double crossing_point(const BargainingProblem& p, std::size_t k, double target, double lo,
                      double hi, bool rising) {
  while (hi - lo > kAlphaResolution) {
    const double mid = 0.5 * (lo + hi);
    const bool above = device_utility_at(p, k, mid) >= target;
    if (above == rising)
      hi = mid;
    else
      lo = mid;
  }
  return rising ? hi : lo;
}

}  // namespace

BargainingProblem make_problem(const Scenario& scenario, std::vector<double> expected_taus,
                               double tolerance, CommDelayMode mode) {
  if (tolerance <= 0.0) throw validation_error("tolerance: must be > 0");
  if (expected_taus.size() != scenario.n_devices())
    throw validation_error("expected_taus: length must equal n_devices");
  BargainingProblem p{scenario, std::move(expected_taus), {}, {}, tolerance, mode};
  p.ideal = ideal_point(scenario, p.expected_taus, mode);
  p.disagreement.device_utilities.assign(scenario.n_devices(), 0.0);
  p.disagreement.server_utility = 0.0;
  for (std::size_t i = 0; i < p.ideal.n_players(); ++i)
    if (p.disagreement.player(i) > p.ideal.player(i))
      throw bargaining_domain_error("disagreement point exceeds ideal point at player " +
                                    std::to_string(i));
  return p;
}

std::optional<AlphaInterval> feasible_alpha_interval_device(std::size_t k, double target,
                                                            const BargainingProblem& problem) {
  const double peak_alpha =
      ideal_alpha_device(problem.scenario.devices[k],
                         effective_device_kappa(problem.scenario.server));
  const double peak = device_utility_at(problem, k, peak_alpha);
  if (peak < target) return std::nullopt;

  double lo = peak_alpha;
  if (device_utility_at(problem, k, 0.0) >= target)
    lo = 0.0;
  else
    lo = crossing_point(problem, k, target, 0.0, peak_alpha, /*rising=*/true);

  double hi = peak_alpha;
  if (device_utility_at(problem, k, 1.0) >= target)
    hi = 1.0;
  else
    hi = crossing_point(problem, k, target, peak_alpha, 1.0, /*rising=*/false);

  return AlphaInterval{lo, hi};
}

std::optional<AlphaInterval> feasible_alpha_interval_server(double target,
                                                            const BargainingProblem& problem) {
  const double at_zero =
      server_utility(SplitFraction{0.0}, problem.scenario, problem.expected_taus, problem.delay_mode);
  const double slope = server_utility_slope(problem.scenario);
  if (slope == 0.0) {
    if (at_zero >= target) return AlphaInterval{0.0, 1.0};
    return std::nullopt;
  }
  const double alpha0 = (target - at_zero) / slope;
  if (slope > 0.0) {
    if (alpha0 > 1.0) return std::nullopt;
    return AlphaInterval{std::clamp(alpha0, 0.0, 1.0), 1.0};
  }
  if (alpha0 < 0.0) return std::nullopt;
  return AlphaInterval{0.0, std::clamp(alpha0, 0.0, 1.0)};
}

FeasibilityResult feasibility_test(double beta, const BargainingProblem& problem) {
  double lo = 0.0;
  double hi = 1.0;
  const std::size_t n = problem.scenario.n_devices();
  for (std::size_t k = 0; k < n; ++k) {
    const double phi = problem.disagreement.device_utilities[k];
    const double target = phi + beta * (problem.ideal.device_utilities[k] - phi);
    const auto interval = feasible_alpha_interval_device(k, target, problem);
    if (!interval) return {false, std::nullopt};
    lo = std::max(lo, interval->lo);
    hi = std::min(hi, interval->hi);
    if (lo > hi) return {false, std::nullopt};
  }
  const double phi_s = problem.disagreement.server_utility;
  const double target_s = phi_s + beta * (problem.ideal.server_utility - phi_s);
  const auto interval = feasible_alpha_interval_server(target_s, problem);
  if (!interval) return {false, std::nullopt};
  lo = std::max(lo, interval->lo);
  hi = std::min(hi, interval->hi);
  if (lo > hi) return {false, std::nullopt};
  return {true, AlphaInterval{lo, hi}.midpoint()};
}

BargainingOutcome solve_ksbs(const BargainingProblem& problem) {
  for (std::size_t i = 0; i < problem.ideal.n_players(); ++i)
    if (!(problem.ideal.player(i) > 0.0))
      throw bargaining_domain_error(
          "ideal utility of player " + std::to_string(i) + " is " +
          std::to_string(problem.ideal.player(i)) +
          "; the beta scaling needs strictly positive ideals (tune the payoff rates)");

  BargainingOutcome out;
  auto probe = [&](double beta) {
    const FeasibilityResult r = feasibility_test(beta, problem);
    out.trace.push_back({out.trace.size(), beta, r.feasible, r.witness_alpha});
    return r;
  };

  std::optional<double> best_beta;
  std::optional<double> best_witness;

  // The maximum can sit exactly at beta = 1 (all players share a maximizer);
  // plain bisection would only approach it from below.
  const FeasibilityResult at_one = probe(1.0);
  if (at_one.feasible) {
    best_beta = 1.0;
    best_witness = at_one.witness_alpha;
  } else {
    double beta_min = 0.0;
    double beta_max = 1.0;
    while (beta_max - beta_min >= problem.tolerance) {
      const double beta = 0.5 * (beta_min + beta_max);
      const FeasibilityResult r = probe(beta);
      if (r.feasible) {
        beta_min = beta;
        best_beta = beta;
        best_witness = r.witness_alpha;
      } else {
        beta_max = beta;
      }
    }
    if (!best_beta) {
      const FeasibilityResult at_zero = probe(0.0);
      if (!at_zero.feasible)
        throw solver_error("no feasible beta >= 0: no split fraction meets every player's "
                           "disagreement utility");
      best_beta = 0.0;
      best_witness = at_zero.witness_alpha;
    }
  }

  out.beta_star = *best_beta;
  out.alpha_star = *best_witness;
  out.iterations = out.trace.size();
  out.utilities_at_alpha = utilities_at(SplitFraction{out.alpha_star}, problem.scenario,
                                        problem.expected_taus, problem.delay_mode);
  return out;
}

BargainingOutcome brute_force_ksbs(const BargainingProblem& problem, double grid_resolution) {
  if (!(grid_resolution > 0.0 && grid_resolution <= 1e-3))
    throw validation_error("grid_resolution: must be in (0, 1e-3]");
  const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / grid_resolution));

  BargainingOutcome out;
  double best_min_ratio = -std::numeric_limits<double>::infinity();
  double best_alpha = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double alpha =
        (i == steps) ? 1.0 : static_cast<double>(i) * grid_resolution;
    const UtilityVector u =
        utilities_at(SplitFraction{alpha}, problem.scenario, problem.expected_taus,
                     problem.delay_mode);
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < u.n_players(); ++p) {
      const double phi = problem.disagreement.player(p);
      min_ratio = std::min(min_ratio, (u.player(p) - phi) / (problem.ideal.player(p) - phi));
    }
    if (min_ratio > best_min_ratio) {
      best_min_ratio = min_ratio;
      best_alpha = alpha;
    }
  }
  out.beta_star = best_min_ratio;
  out.alpha_star = best_alpha;
  out.iterations = steps + 1;
  out.utilities_at_alpha = utilities_at(SplitFraction{best_alpha}, problem.scenario,
                                        problem.expected_taus, problem.delay_mode);
  return out;
}

std::size_t cut_layer_from_alpha(double alpha, std::span<const std::size_t> layer_param_counts) {
  if (layer_param_counts.empty()) throw validation_error("layer_param_counts: must not be empty");
  double total = 0.0;
  for (std::size_t c : layer_param_counts) total += static_cast<double>(c);
  if (total <= 0.0) throw validation_error("layer_param_counts: total must be > 0");

  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  double cumulative = 0.0;
  for (std::size_t c = 0; c < layer_param_counts.size(); ++c) {
    cumulative += static_cast<double>(layer_param_counts[c]);
    const double dist = std::abs(cumulative / total - alpha);
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace splitbargain
