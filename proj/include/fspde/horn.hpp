#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace fspde {

/// Positive, strictly decreasing cross-section profile b of an unbounded
/// horn. log b stays in closed form so ratio diagnostics survive the
/// underflow of b itself far down the horn.
class BoundaryCurve {
public:
    enum class Family { stretched_exp, plain_exp };

    /// b(x) = exp(-x^(1+delta)), delta > 0. Shrinks fast enough that
    /// b(s+eps)/b(s) -> 0 for every fixed eps.
    static BoundaryCurve stretched_exp(double delta);

    /// b(x) = exp(-rate*x), rate > 0. The ratio b(s+eps)/b(s) is constant in
    /// s instead of decaying, so the squeeze diagnostic rejects it; kept as
    /// the canonical rejected example.
    static BoundaryCurve plain_exp(double rate);

    Family family() const { return family_; }
    double parameter() const { return param_; }

    double value(double x) const;      // may underflow to 0 far out
    double log_value(double x) const;  // exact closed form
    double derivative(double x) const;

    /// Largest x with b(x) > level, for level in (0, 1); closed form per
    /// family. Returns 0 when level >= b(0).
    double inverse(double level) const;

    std::string describe() const;

private:
    BoundaryCurve(Family f, double p) : family_(f), param_(p) {}
    Family family_;
    double param_;
};

struct CurveEpsilonTrace {
    double epsilon = 0.0;
    std::vector<double> s_values;
    std::vector<double> ratios;  // b(s+eps)/b(s) along the sweep
    bool decayed = false;        // final ratio < 1e-3
    bool monotone = false;       // ratios nonincreasing along the sweep
};

struct CurveCheckReport {
    std::vector<CurveEpsilonTrace> traces;
    bool positive = false;
    bool decreasing = false;
    bool derivative_bounded = false;
    double derivative_max_abs = 0.0;
    bool admissible = false;
};

/// Numerical admissibility check: for each eps, the ratio b(s+eps)/b(s) is
/// evaluated on a geometric sweep of s up to s_max and must decay to below
/// 1e-3 monotonically. Requires log b(s_max + max eps) > -745 so that the
/// ratios are meaningful in double precision.
CurveCheckReport validate_curve(const BoundaryCurve& curve,
                                const std::vector<double>& epsilons,
                                double s_max);

struct GridFace {
    std::int32_t a = -1, b = -1; // cell ids, a < b
    std::int8_t axis = 0;        // 0..dim-1 in lattice coordinates
    double measure = 0.0;        // clipped face length (2-D) or area (3-D)
    double dist = 0.0;           // centre distance
};

/// Finite-volume grid on the truncated horn D cap {axial < L}: an axis
/// aligned lattice of spacing `resolution`, cells clipped to the boundary by
/// quadrature. Fluxes across boundary faces are omitted, which is the
/// zero-flux (Neumann) closure. 2-D horns open along x1 with 0 < x2 < b(x1);
/// 3-D horns open along x3 with circular section of radius b(x3).
struct HornGrid {
    int dimension = 2;
    BoundaryCurve curve = BoundaryCurve::stretched_exp(1.0);
    double truncation = 0.0;   // snapped up to a lattice multiple
    double resolution = 0.0;

    std::vector<std::array<double, 3>> centers;
    std::vector<double> measure;                    // cell areas / volumes
    std::vector<std::uint8_t> boundary;             // 1 if the cell touches the horn boundary
    std::vector<std::array<std::int32_t, 3>> lattice;
    std::vector<GridFace> faces;
    std::unordered_map<std::uint64_t, std::int32_t> index; // lattice key -> cell
    double measure_total = 0.0;
    double tail_measure = 0.0; // measure of D beyond the truncation

    std::size_t n_cells() const { return measure.size(); }
    int axial_axis() const { return dimension == 2 ? 0 : 2; }
    double axial(std::size_t c) const { return centers[c][axial_axis()]; }

    static std::uint64_t key(std::int32_t i, std::int32_t j, std::int32_t k);
    /// Cell id at lattice coordinates, or -1.
    std::int32_t cell_at(std::int32_t i, std::int32_t j, std::int32_t k) const;
};

/// Builds the clipped lattice. Throws std::invalid_argument when the
/// resolution cannot resolve the horn mouth (needs resolution <= b(0)/4) or
/// gives fewer than 8 axial columns; the message suggests a resolution.
HornGrid build_grid(const BoundaryCurve& curve, int dimension, double truncation,
                    double resolution);

/// Discrete L2 mass of the field beyond the cut: sum of measure*u^2 over
/// cells whose centre lies at axial coordinate > L_cut.
double tail_mass(const HornGrid& grid, const std::vector<double>& field, double L_cut);

/// sqrt(sum_c measure_c u_c^2)
double l2_norm(const HornGrid& grid, const std::vector<double>& field);

/// Flux-weighted gradient seminorm: sqrt(sum_faces measure/dist * (u_a-u_b)^2).
/// This is exactly the Dirichlet form of the unit-coefficient operator.
double h1_seminorm(const HornGrid& grid, const std::vector<double>& field);

/// Measure-weighted average of child cells onto the coarse lattice. The fine
/// grid must have resolution coarse.resolution / 2^k on the same lattice
/// origin and truncation at least as large.
std::vector<double> restrict_field(const HornGrid& fine, const HornGrid& coarse,
                                   const std::vector<double>& field);

/// measure of D between the truncation and infinity by tail quadrature:
/// integral of b (2-D) or pi b^2 (3-D) from L to infinity.
double horn_tail_measure(const BoundaryCurve& curve, int dimension, double L);

} // namespace fspde
