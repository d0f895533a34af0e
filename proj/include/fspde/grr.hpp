#pragma once

#include <cstddef>
#include <vector>

#include "fspde/fbm.hpp"
#include "fspde/hurst.hpp"
#include "fspde/time_grid.hpp"

namespace fspde {

/// log of the double integral over [0,T]^2 of |f(s)-f(t)|^q / |s-t|^{beta*q+1}
/// for the piecewise-linear interpolant of the samples. Same-cell blocks are
/// closed forms (there the numerator is a pure power of |s-t|), cells touching
/// the diagonal corner use graded quadrature toward the singularity, far
/// blocks use fixed Gauss panels. Everything is accumulated in log space so
/// exponents like q = 160 neither overflow nor underflow. Rows fill in
/// parallel; the fold is serial, so results are thread-count independent.
double log_grr_functional(const std::vector<double>& values, const TimeGrid& grid,
                          double q, double beta);
double log_grr_functional_serial(const std::vector<double>& values, const TimeGrid& grid,
                                 double q, double beta);

/// exp(log_grr_functional); +inf when the value exceeds double range.
double grr_functional(const std::vector<double>& values, const TimeGrid& grid,
                      double q, double beta);

/// The continuity-from-integrability constant in front of the increment
/// bound: c_T * (beta + 1/q) / (beta - 1/q). Requires beta > 1/q.
double grr_constant(double beta, double q, double c_T);

struct GrrCheckResult {
    double max_ratio = 0.0;   // worst |f(t*)-f(t)| / bound over all node pairs
    std::size_t worst_lo = 0; // node indices attaining it
    std::size_t worst_hi = 0;
    double log_functional = 0.0;
    double constant = 0.0;    // grr_constant(beta, q, c_T)
    bool pass = false;        // max_ratio <= 1
};

/// Verifies |f(t*) - f(t)| <= grr_constant * (functional)^{1/q} * |t*-t|^{beta-1/q}
/// over every ordered node pair.
GrrCheckResult grr_check(const std::vector<double>& values, const TimeGrid& grid,
                         double q, double beta, double c_T);

/// Pathwise regularity statistic of an fBm sample at sharpness eps:
/// Theta = (grr functional at q = 2/eps, beta = H - eps/2)^{eps/2}.
/// Requires 0 < eps < 2*H - 1 so that beta*q + 1 stays integrable.
double theta_estimate(const FbmPath& path, double eps);

/// Parameter windows that make the whole pathwise machinery valid:
///   h_min > 1/(gamma+1),
///   alpha in (1 - h_min, gamma/(gamma+1)),
///   eps in (0, h_min - 1 + alpha), canonical eps = midpoint.
struct ConstraintAudit {
    double gamma = 0.0;
    double h_min = 0.0;
    bool h_min_ok = false;
    double alpha_lo = 0.0, alpha_hi = 0.0; // admissible alpha window
    double alpha = 0.0;                    // proposed value (NaN if none given)
    bool alpha_ok = false;
    double eps_hi = 0.0;                   // h_min - 1 + alpha
    double eps_canonical = 0.0;            // (h_min - 1 + alpha) / 2
    bool pass = false;
};

ConstraintAudit constraint_audit(const HurstSequence& hs);
ConstraintAudit constraint_audit(const HurstSequence& hs, double alpha);

/// Constant of the pathwise chain Lambda_alpha <= C * Theta for a mode with
/// Hurst H_i: c_T * H_i/(H_i - eps) * max(1,T)^{H_i - h_min}
///            * T^{h_min - eps - 1 + alpha} * (h_min - eps + alpha)/(h_min - eps - 1 + alpha).
double lambda_chain_constant(double H_i, double h_min, double eps, double alpha,
                             double horizon, double c_T);

/// Frozen empirical calibration of c_T (see data/grr_calibration.json for the
/// corpus and the regeneration recipe).
double calibrated_c_T();

} // namespace fspde
