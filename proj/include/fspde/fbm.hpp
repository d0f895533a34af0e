#pragma once

#include <cstdint>
#include <vector>

#include "fspde/hurst.hpp"
#include "fspde/time_grid.hpp"

namespace fspde {

enum class FbmMethod {
    cholesky,  // exact, any grid size; factorization of the increment covariance
    circulant, // exact in law, uniform power-of-two grids; FFT embedding
};

/// One fractional Brownian path sampled on a uniform grid. values[0] == 0.
struct FbmPath {
    double hurst = 0.5;
    TimeGrid grid{1.0, 1};
    std::vector<double> values; // n_steps + 1 entries
    std::uint64_t seed = 0;

    double increment(std::size_t k) const { return values[k + 1] - values[k]; }
};

/// Covariance of fractional Brownian motion,
///   0.5 * (s^{2H} + t^{2H} - |s-t|^{2H}),  s, t >= 0, H in (0, 1).
double fbm_covariance(double hurst, double s, double t);

/// Exact Gaussian sample on `grid`: increments drawn through a Cholesky factor
/// of their joint covariance (or through a circulant embedding, equal in law
/// but not sample-wise), then prefix-summed. Deterministic given seed.
FbmPath sample_fbm(double hurst, const TimeGrid& grid, std::uint64_t seed,
                   FbmMethod method = FbmMethod::cholesky);

/// One path per Hurst entry, mutually independent; path i uses
/// derive_subseed(seed, i). count must not exceed hs.values.size().
std::vector<FbmPath> sample_fbm_family(const HurstSequence& hs, const TimeGrid& grid,
                                       std::uint64_t seed, std::size_t count);

/// count independent paths of one Hurst parameter; path i uses
/// derive_subseed(seed, i). The factorization is shared, paths are produced
/// in parallel, and output is independent of the thread count.
std::vector<FbmPath> sample_fbm_ensemble(double hurst, const TimeGrid& grid,
                                         std::uint64_t seed, std::size_t count,
                                         FbmMethod method = FbmMethod::cholesky);

/// Split every increment into `factor` equal parts. The result is the
/// piecewise-linear interpolant of the input sampled on the finer grid: the
/// project-wide refinement convention, which keeps a driving signal fixed
/// across coupled (dt, mesh) refinement studies.
FbmPath subdivide_increments(const FbmPath& path, std::size_t factor);

/// Keep every `factor`-th node. Restricting an exact sample is again exact.
FbmPath coarsen(const FbmPath& path, std::size_t factor);

} // namespace fspde
