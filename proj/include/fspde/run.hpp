#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fspde/config.hpp"

namespace fspde {

struct RunOptions {
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    int threads = 0; // 0 = library default
};

/// Ensemble of trajectories; writes per-member norm CSVs, optional field
/// snapshots and a manifest. Returns 0 on success.
int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt);

/// Named check suites: noise | grr | regularity | embedding | residual |
/// uniqueness | all. Writes a report and a manifest; returns 0 iff every
/// check in the suite passes.
int cmd_verify(const ExperimentConfig& cfg, const std::string& suite, const RunOptions& opt);

/// Coupled (dt, mesh, noise) refinement table over `levels` levels.
/// Refuses level counts whose finest grid would exceed the memory budget.
int cmd_convergence(const ExperimentConfig& cfg, std::size_t levels, const RunOptions& opt);

/// Standalone fBm sampling to CSV (and optionally the binary container).
int cmd_fbm_sample(double hurst, double horizon, std::size_t n_steps,
                   std::uint64_t seed, std::size_t count, bool binary,
                   const RunOptions& opt);

/// Curve admissibility report plus truncation/measure table for the grid.
int cmd_domain_check(const ExperimentConfig& cfg, const RunOptions& opt);

} // namespace fspde
