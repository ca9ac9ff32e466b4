#pragma once

#include <span>
#include <vector>

#include "splitbargain/cost_utility.hpp"
#include "splitbargain/scenario.hpp"

namespace splitbargain::cli {

/// Sum of all player utilities when the cut sits after one particular layer.
struct SweepEntry {
  std::size_t cut_index = 0;
  double alpha = 0.0;  // cumulative parameter fraction of layers 0..cut_index
  double sum_utility = 0.0;
  UtilityVector utilities;
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // one per layer of the architecture
};

/// Evaluates every player's utility at each layer's cumulative parameter
/// fraction and totals them; the per-layer view of the bargaining surface.
SweepResult sweep_utilities(const Scenario& scenario,
                            std::span<const std::size_t> layer_param_counts,
                            std::span<const double> expected_taus,
                            CommDelayMode mode = CommDelayMode::kSlowestDevice);

/// Entry point behind the splitbargain binary. Subcommands: gen-scenario,
/// gen-data, ksbs, sweep, train, report. Returns the process exit code
/// (0 success, 1 runtime failure, 2 usage error).
int dispatch(int argc, const char* const* argv);

}  // namespace splitbargain::cli
