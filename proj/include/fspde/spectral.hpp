#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <vector>

#include "fspde/fbm.hpp"
#include "fspde/horn.hpp"
#include "fspde/hurst.hpp"
#include "fspde/time_grid.hpp"

namespace fspde {

/// Leading eigenpairs of the discrete zero-flux diffusion operator on a horn
/// grid, turned into a trace-shaped covariance: lambda_i = (1 + mu_i)^{-s}.
/// Columns of `modes` are orthonormal in the measure-weighted inner product;
/// mode 0 is the constant with mu ~ 0.
struct SpectralBasis {
    std::shared_ptr<const HornGrid> grid;
    double decay_exponent = 0.0;
    std::vector<double> mu;       // ascending
    std::vector<double> lambda;   // (1 + mu_i)^{-decay_exponent}
    std::vector<double> sup_norm; // max_c |e_i(c)|
    Eigen::MatrixXd modes;        // n_cells x n_modes

    std::size_t n_modes() const { return mu.size(); }
};

/// Dense symmetric eigensolve of the mass-normalized operator. Throws on
/// n_modes > n_cells, on grids too large for a dense solve (> 6000 cells),
/// and on eigensolver failure.
SpectralBasis build_basis(std::shared_ptr<const HornGrid> grid, std::size_t n_modes,
                          double decay_exponent);

enum class SpectralVerdict { pass, fail, indeterminate };

struct SpectralReport {
    std::vector<double> summands; // sqrt(lambda_i) * sup|e_i|
    double partial_sum = 0.0;
    double fitted_exponent = 0.0;   // log-log slope over the tail half
    double extrapolated_tail = 0.0; // power-law continuation beyond the modes
    SpectralVerdict verdict = SpectralVerdict::indeterminate;
};

/// Convergence gate for sum_i sqrt(lambda_i) sup|e_i|: fits a power law to
/// the tail half of the summands and passes iff the fitted exponent is below
/// -1. Fewer than 8 modes is refused as indeterminate rather than guessed.
SpectralReport check_spectral_condition(const std::vector<double>& lambda,
                                        const std::vector<double>& sup_norms);
SpectralReport check_spectral_condition(const SpectralBasis& basis);

/// Increments of the mode-wise fractional drivers: row i holds the n_steps
/// increments of an independent B^{H_i}, sub-seeded per mode from `seed`.
struct NoiseIncrementSet {
    std::shared_ptr<const SpectralBasis> basis;
    HurstSequence hurst;
    TimeGrid time{1.0, 1};
    std::uint64_t seed = 0;
    Eigen::MatrixXd increments; // n_modes x n_steps

    std::size_t n_modes() const { return static_cast<std::size_t>(increments.rows()); }
};

/// Requires hs.values.size() >= basis->n_modes().
NoiseIncrementSet sample_noise(std::shared_ptr<const SpectralBasis> basis,
                               const HurstSequence& hs, const TimeGrid& time,
                               std::uint64_t seed);

/// Split every increment of every mode into `factor` equal parts, keeping
/// the driving signal fixed under time refinement.
NoiseIncrementSet subdivide_noise(const NoiseIncrementSet& noise, std::size_t factor);

/// Nodal field of the step increment: sum_i sqrt(lambda_i) e_i dB^i_step.
std::vector<double> evaluate_noise_field(const NoiseIncrementSet& noise, std::size_t step);

} // namespace fspde
