#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fspde/space_time.hpp"
#include "fspde/spectral.hpp"

namespace fspde {

/// Diagonal diffusion tensors with closed-form ellipticity bounds. Families:
///   identity, scaled (k0 I), diag (constant anisotropy),
///   variable: k0 (1 + ax cos(fx * s)) (1 + at sin(pi t / T)) I with
///   |ax| + |at| < 1 enforced at construction; s = x0 + x2 is the axial
///   coordinate on 2-D grids (x2 = 0 there) and an oblique blend on 3-D ones.
class CoefficientField {
public:
    static CoefficientField identity();
    static CoefficientField scaled(double k0);
    static CoefficientField diag(std::vector<double> k_axis);
    static CoefficientField variable(double k0, double amp_x, double freq_x,
                                     double amp_t, double horizon);

    /// Tensor entry along a lattice axis at position x, time t.
    double axis_value(const std::array<double, 3>& x, int axis, double t) const;
    double lower() const { return lower_; } // ellipticity floor over space-time
    double upper() const { return upper_; }
    bool time_dependent() const { return kind_ == Kind::variable && amp_t_ != 0.0; }
    std::string describe() const;

private:
    enum class Kind { identity, scaled, diag, variable };
    CoefficientField() = default;
    Kind kind_ = Kind::identity;
    double k0_ = 1.0;
    std::vector<double> k_axis_;
    double amp_x_ = 0.0, freq_x_ = 0.0, amp_t_ = 0.0, horizon_ = 1.0;
    double lower_ = 1.0, upper_ = 1.0;
};

/// Scalar drift g (globally Lipschitz) and noise coefficient h (Lipschitz
/// with gamma-smooth derivative), from closed-form families:
///   zero | affine a*u + b | tanh a*tanh(u) | sine a*sin(u).
struct NonlinearitySpec {
    enum class Kind { zero, affine, tanh, sine };
    Kind g_kind = Kind::zero;
    double g_a = 0.0, g_b = 0.0;
    Kind h_kind = Kind::zero;
    double h_a = 0.0, h_b = 0.0;
    double gamma = 1.0; // Hoelder exponent of h'

    double g(double u) const;
    double h(double u) const;
    double g_lipschitz() const;
    double h_lipschitz() const;
    bool h_affine() const { return h_kind == Kind::zero || h_kind == Kind::affine; }
    std::string describe() const;
};

/// Stiffness matrix S of the zero-flux divergence-form operator at time t:
/// (S u)_a = sum_faces T_f (u_a - u_b) with T_f = face measure / distance
/// times the harmonic mean of the tensor entry at the two centres. Symmetric
/// positive-semidefinite with zero row sums; -S is the operator matrix.
Eigen::SparseMatrix<double> stiffness_matrix(const HornGrid& grid,
                                             const CoefficientField& k, double t);

struct SolveSetup {
    std::shared_ptr<const HornGrid> grid;
    std::shared_ptr<const SpectralBasis> basis;
    HurstSequence hurst;
    TimeGrid time{1.0, 1};
    CoefficientField coeff = CoefficientField::identity();
    NonlinearitySpec nl;
    std::vector<double> initial;
    std::uint64_t seed = 0;
};

struct Trajectory {
    SolveSetup setup;
    NoiseIncrementSet noise;
    SpaceTimeField field;
    std::vector<double> l2;      // per time node
    std::vector<double> h1semi;  // per time node
};

/// One semi-implicit step: solves
///   (M + dt S(t_{n+1})) u_{n+1} = M (u_n + dt g(u_n) + h(u_n) .* dW_n)
/// by Jacobi-preconditioned conjugate gradients. Solved past the 1e-10
/// residual contract (1e-13 plus one iterative refinement pass) so the exact
/// discrete balance identities hold to rounding. Left-point noise evaluation
/// matches the Young integral convention.
std::vector<double> semi_implicit_step(const SolveSetup& setup,
                                       const Eigen::SparseMatrix<double>& S_next,
                                       double dt, const std::vector<double>& u,
                                       const std::vector<double>& dW);

/// Full trajectory with freshly sampled noise (sub-seeded from setup.seed).
Trajectory solve(const SolveSetup& setup);

/// Full trajectory driven by the given increments (refinement studies keep
/// the coarse increments and subdivide them).
Trajectory solve_with_noise(const SolveSetup& setup, const NoiseIncrementSet& noise);

/// Residual of the weak (variational) identity against the separable test
/// function v(x) eta(tau) on [0, t]: the mass term at t minus the initial
/// term, minus the time integrals of the eta' mass term, the k-weighted
/// gradient form, the drift term and the mode-wise Young integrals of the
/// noise term. Deterministic integrals use left-point sums, matching the
/// stochastic convention; t must be a grid node.
double variational_residual(const Trajectory& traj, const std::vector<double>& v,
                            const std::vector<double>& eta,
                            const std::vector<double>& eta_prime, double t);

struct UniquenessReport {
    double sup_distance = 0.0;   // max_n || u1_n - u2_n ||_2
    bool fixed_point_converged = true;
    std::size_t max_iterations = 0;
    bool h_affine = true;        // outside the affine family this probe is
                                 // descriptive only, never asserted
};

/// Runs the semi-implicit scheme against a drift-implicit fixed-point scheme
/// on the same noise and reports the sup-in-time L2 distance. Both schemes
/// evaluate the noise term at the left node (the convention of the pathwise
/// integral), so they differ in the drift treatment alone and their distance
/// vanishes at first order in dt.
UniquenessReport uniqueness_probe(const SolveSetup& setup, const NoiseIncrementSet& noise);

} // namespace fspde
