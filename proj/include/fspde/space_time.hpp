#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "fspde/horn.hpp"
#include "fspde/time_grid.hpp"

namespace fspde {

/// Nodal space-time field: one column of cell values per time node, linear
/// interpolation in time between nodes.
struct SpaceTimeField {
    std::shared_ptr<const HornGrid> grid;
    TimeGrid time{1.0, 1};
    Eigen::MatrixXd values; // n_cells x (n_steps + 1)

    std::vector<double> column(std::size_t k) const;
};

/// Squared fractional sup norm:
///   (sup_t ||u(t)||_2)^2
///   + int_0^T ( int_0^t ||u(t)-u(tau)||_2 / (t-tau)^{alpha+1} dtau )^2 dt.
/// The singular inner kernel is integrated in closed form against the
/// linear-in-time interpolant of tau -> ||u(t)-u(tau)||_2; the outer integral
/// uses the trapezoid rule on the time nodes. Outer rows fill in parallel,
/// thread-count independent. Returns the squared norm.
double balpha_norm_sq(const SpaceTimeField& u, double alpha);
double balpha_norm_sq_serial(const SpaceTimeField& u, double alpha);

/// Squared tensor Sobolev norm: exact time integrals of the interpolant of
/// ||u(t)||_2^2 + |u(t)|_{H1}^2 plus the exact integral of ||du/dt||_2^2
/// (piecewise-constant derivative). Returns the squared norm.
double tensor_h1_norm_sq(const SpaceTimeField& u);

/// Linear interpolation of the field at time t (clamped to grid nodes at the
/// endpoints; t must lie in [0, T]).
std::vector<double> trace_at(const SpaceTimeField& u, double t);

struct EmbeddingReport {
    double c_emp = 0.0;          // max over corpus of balpha / tensor norm
    double analytic_chain = 0.0; // coth(T) + T^{2-2a}/((1/2-a)^2 (2-2a)), sqrt'd
    std::size_t corpus_size = 0;
    double increment_worst = 0.0; // worst ||u(t)-u(tau)||_2 / ((t-tau)^{1/2} ||u||)
    bool increment_ok = false;    // increment_worst <= 1 (+ float slack)
    std::vector<double> ratios;   // per-member balpha / tensor ratio
};

/// Empirical embedding constant of balpha against the tensor norm over a
/// corpus, plus the exact square-root increment bound
/// ||u(t)-u(tau)||_2 <= (t-tau)^{1/2} ||u||_tensor checked at all node pairs.
EmbeddingReport embedding_check(const std::vector<SpaceTimeField>& corpus, double alpha);

double balpha_norm(const SpaceTimeField& u, double alpha);
double tensor_h1_norm(const SpaceTimeField& u);

} // namespace fspde
