#pragma once

#include <cstddef>
#include <vector>

#include "fspde/fbm.hpp"
#include "fspde/time_grid.hpp"

namespace fspde {

/// Scalar integrand tabulated on the same grid as its integrator.
struct IntegrandPath {
    TimeGrid grid{1.0, 1};
    std::vector<double> values; // n_steps + 1 entries
};

/// Left-point Riemann-Stieltjes sum of f against B between two grid nodes:
/// sum f(t_n) (B(t_{n+1}) - B(t_n)). Both times must be nodes of the shared
/// grid; mismatched grids are rejected.
double young_integrate(const IntegrandPath& f, const FbmPath& B, double t_from, double t_to);

/// sin(pi alpha)/pi times the sup over all ordered node pairs (t, t*) of
/// |(B(t)-B(t*)) / (t*-t)^{1-alpha}
///  + (1-alpha) * int_t^{t*} (B(t)-B(tau)) / (tau-t)^{2-alpha} dtau|,
/// the inner integral taken exactly against the piecewise-linear interpolant
/// of B. O(n^2) via running inner sums per left node; rows fill in parallel
/// and results do not depend on the thread count. alpha in (0, 1/2).
double estimate_lambda(const std::vector<double>& values, const TimeGrid& grid, double alpha);
double estimate_lambda_serial(const std::vector<double>& values, const TimeGrid& grid, double alpha);
double estimate_lambda(const FbmPath& B, double alpha);

/// The deterministic weight of the pathwise Stieltjes bound on [t_from, t_to]:
///   int (|f(tau)|/(tau-t_from)^alpha
///        + alpha int_{t_from}^tau |f(tau)-f(rho)|/(tau-rho)^{alpha+1} drho) dtau.
/// Singular kernels are integrated in closed form per linear segment (with
/// splits at sign changes); the remaining smooth layer uses the trapezoid
/// rule on the grid.
double stieltjes_weight(const IntegrandPath& f, double alpha, double t_from, double t_to);

/// estimate_lambda(B, alpha) * stieltjes_weight(f, alpha, t_from, t_to):
/// a computable majorant of |young_integrate(f, B, t_from, t_to)|.
double stieltjes_bound(const IntegrandPath& f, const FbmPath& B, double alpha,
                       double t_from, double t_to);

/// Least-squares slope of log sup-increment against log lag over dyadic lags
/// 1, 2, 4, ..., n/4. Needs at least 32 nodes. A flat series returns +inf.
double holder_exponent(const std::vector<double>& values, const TimeGrid& grid);

} // namespace fspde
