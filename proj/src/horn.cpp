#include "fspde/horn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fspde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 8-point Gauss-Legendre rule on [0,1]
constexpr double kG8x[8] = {0.019855071751231856, 0.10166676129318664,
                            0.2372337950418355,   0.4082826787521751,
                            0.5917173212478249,   0.7627662049581645,
                            0.8983332387068134,   0.9801449282487682};
constexpr double kG8w[8] = {0.05061426814518813, 0.11119051722668723,
                            0.15685332293894364, 0.18134189168918099,
                            0.18134189168918099, 0.15685332293894364,
                            0.11119051722668723, 0.05061426814518813};

template <class F>
double gauss8(const F& f, double a, double b) {
    if (!(b > a)) return 0.0;
    const double w = b - a;
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += kG8w[i] * f(a + kG8x[i] * w);
    return s * w;
}

// integral of f over [a,b] with the integrand smooth between the given split
// points (splits outside (a,b) are ignored)
template <class F>
double gauss8_split(const F& f, double a, double b, std::vector<double> splits) {
    if (!(b > a)) return 0.0;
    splits.push_back(a);
    splits.push_back(b);
    std::sort(splits.begin(), splits.end());
    double total = 0.0, lo = a;
    for (double s : splits) {
        if (s <= lo || s > b) continue;
        total += gauss8(f, lo, std::min(s, b));
        lo = s;
    }
    if (lo < b) total += gauss8(f, lo, b);
    return total;
}

// area of {0 <= u <= x, 0 <= v <= y, u^2 + v^2 <= r^2} for x, y >= 0
double quarter_box_disk(double x, double y, double r) {
    if (x <= 0.0 || y <= 0.0 || r <= 0.0) return 0.0;
    auto S = [r](double t) { // integral of sqrt(r^2-u^2) on [0,t], t <= r
        return 0.5 * (t * std::sqrt(std::max(r * r - t * t, 0.0)) +
                      r * r * std::asin(std::min(t / r, 1.0)));
    };
    const double xc = std::min(x, r);
    if (y >= r) return S(xc);
    const double u = std::sqrt(r * r - y * y); // circle crosses height y here
    if (xc <= u) return y * xc;
    return y * u + S(xc) - S(u);
}

double corner_signed(double x, double y, double r) {
    double s = 1.0;
    if (x < 0.0) { s = -s; x = -x; }
    if (y < 0.0) { s = -s; y = -y; }
    return s * quarter_box_disk(x, y, r);
}

// exact area of [x0,x1] x [y0,y1] intersected with the disk of radius r
double box_disk_area(double x0, double x1, double y0, double y1, double r) {
    if (r <= 0.0) return 0.0;
    return corner_signed(x1, y1, r) - corner_signed(x0, y1, r) -
           corner_signed(x1, y0, r) + corner_signed(x0, y0, r);
}

double interval_origin_distance(double a, double b) {
    if (a > 0.0) return a;
    if (b < 0.0) return -b;
    return 0.0;
}

} // namespace

BoundaryCurve BoundaryCurve::stretched_exp(double delta) {
    if (!(delta > 0.0))
        throw std::invalid_argument("stretched_exp: delta must be positive");
    return BoundaryCurve(Family::stretched_exp, delta);
}

BoundaryCurve BoundaryCurve::plain_exp(double rate) {
    if (!(rate > 0.0))
        throw std::invalid_argument("plain_exp: rate must be positive");
    return BoundaryCurve(Family::plain_exp, rate);
}

double BoundaryCurve::log_value(double x) const {
    if (x < 0.0) throw std::invalid_argument("profile: x must be nonnegative");
    if (family_ == Family::stretched_exp) return -std::pow(x, 1.0 + param_);
    return -param_ * x;
}

double BoundaryCurve::value(double x) const { return std::exp(log_value(x)); }

double BoundaryCurve::derivative(double x) const {
    if (x < 0.0) throw std::invalid_argument("profile: x must be nonnegative");
    if (family_ == Family::stretched_exp)
        return -(1.0 + param_) * std::pow(x, param_) * value(x);
    return -param_ * value(x);
}

double BoundaryCurve::inverse(double level) const {
    if (!(level > 0.0)) throw std::invalid_argument("profile inverse: level must be positive");
    if (level >= 1.0) return 0.0; // b(0) = 1 for both families
    const double L = -std::log(level);
    if (family_ == Family::stretched_exp) return std::pow(L, 1.0 / (1.0 + param_));
    return L / param_;
}

std::string BoundaryCurve::describe() const {
    std::ostringstream os;
    if (family_ == Family::stretched_exp)
        os << "stretched_exp(delta=" << param_ << ")";
    else
        os << "plain_exp(rate=" << param_ << ")";
    return os.str();
}

CurveCheckReport validate_curve(const BoundaryCurve& curve,
                                const std::vector<double>& epsilons,
                                double s_max) {
    if (epsilons.empty())
        throw std::invalid_argument("validate_curve: need at least one eps");
    double max_eps = 0.0;
    for (double e : epsilons) {
        if (!(e > 0.0)) throw std::invalid_argument("validate_curve: eps must be positive");
        max_eps = std::max(max_eps, e);
    }
    if (!(s_max > 0.0)) throw std::invalid_argument("validate_curve: s_max must be positive");
    if (curve.log_value(s_max + max_eps) < -745.0)
        throw std::invalid_argument(
            "validate_curve: b underflows before the end of the sweep; shrink s_max");

    CurveCheckReport rep;

    // geometric sweep of base points, plus the origin
    std::vector<double> sweep{0.0};
    for (int k = 10; k >= 0; --k) sweep.push_back(s_max / double(1 << k));

    for (double eps : epsilons) {
        CurveEpsilonTrace tr;
        tr.epsilon = eps;
        tr.s_values = sweep;
        tr.ratios.reserve(sweep.size());
        for (double s : sweep)
            tr.ratios.push_back(std::exp(curve.log_value(s + eps) - curve.log_value(s)));
        tr.decayed = tr.ratios.back() < 1e-3;
        tr.monotone = true;
        for (std::size_t i = 0; i + 1 < tr.ratios.size(); ++i)
            if (tr.ratios[i + 1] > tr.ratios[i] * (1.0 + 1e-9)) tr.monotone = false;
        rep.traces.push_back(std::move(tr));
    }

    rep.positive = true; // log b is finite over the sweep, checked above
    rep.decreasing = true;
    rep.derivative_max_abs = 0.0;
    const int n_probe = 256;
    double prev = curve.log_value(0.0);
    for (int i = 1; i <= n_probe; ++i) {
        const double x = (s_max + max_eps) * i / n_probe;
        const double lv = curve.log_value(x);
        if (lv >= prev) rep.decreasing = false;
        prev = lv;
        rep.derivative_max_abs = std::max(rep.derivative_max_abs,
                                          std::abs(curve.derivative(x)));
    }
    rep.derivative_bounded = std::isfinite(rep.derivative_max_abs);

    rep.admissible = rep.positive && rep.decreasing;
    for (const auto& tr : rep.traces)
        if (!(tr.decayed && tr.monotone)) rep.admissible = false;
    return rep;
}

std::uint64_t HornGrid::key(std::int32_t i, std::int32_t j, std::int32_t k) {
    const std::uint64_t bias = 1u << 20;
    return (std::uint64_t(i + bias)) | (std::uint64_t(j + bias) << 21) |
           (std::uint64_t(k + bias) << 42);
}

std::int32_t HornGrid::cell_at(std::int32_t i, std::int32_t j, std::int32_t k) const {
    auto it = index.find(key(i, j, k));
    return it == index.end() ? -1 : it->second;
}

namespace {

// length of [y0, y0+res] cap (0, b(x)), integrated in x across one column
double cell_measure_2d(const BoundaryCurve& curve, double x0, double x1,
                       double y0, double res) {
    const double y1 = y0 + res;
    const double full_until = std::clamp(curve.inverse(y1), x0, x1);
    const double empty_from =
        y0 > 0.0 ? std::clamp(curve.inverse(y0), x0, x1) : x1;
    double m = res * (full_until - x0);
    m += gauss8([&](double x) { return curve.value(x) - y0; }, full_until, empty_from);
    return m;
}

// z-levels inside (z0, z1) where the section radius b(z) crosses one of the
// given radii; the integrands below are smooth between consecutive levels
std::vector<double> section_splits(const BoundaryCurve& curve, double z0, double z1,
                                   const std::vector<double>& radii) {
    std::vector<double> out;
    for (double r : radii) {
        if (!(r > 0.0)) continue;
        if (r >= 1.0) continue; // b never reaches it past the mouth
        const double z = curve.inverse(r);
        if (z > z0 && z < z1) out.push_back(z);
    }
    return out;
}

double cell_measure_3d(const BoundaryCurve& curve, double x0, double x1,
                       double y0, double y1, double z0, double z1) {
    std::vector<double> radii = {std::hypot(x0, y0), std::hypot(x0, y1),
                                 std::hypot(x1, y0), std::hypot(x1, y1)};
    if (y0 < 0.0 && y1 > 0.0) {
        radii.push_back(std::abs(x0));
        radii.push_back(std::abs(x1));
    }
    if (x0 < 0.0 && x1 > 0.0) {
        radii.push_back(std::abs(y0));
        radii.push_back(std::abs(y1));
    }
    auto splits = section_splits(curve, z0, z1, radii);
    return gauss8_split(
        [&](double z) { return box_disk_area(x0, x1, y0, y1, curve.value(z)); },
        z0, z1, std::move(splits));
}

// area of the lattice face x = xf, y in [y0,y1], z in [z0,z1], clipped to the
// horn; by symmetry also serves the y-normal faces with arguments swapped
double side_face_area_3d(const BoundaryCurve& curve, double xf, double y0,
                         double y1, double z0, double z1) {
    std::vector<double> radii = {std::hypot(xf, y0), std::hypot(xf, y1),
                                 std::abs(xf)};
    auto splits = section_splits(curve, z0, z1, radii);
    return gauss8_split(
        [&](double z) {
            const double b = curve.value(z);
            const double rr = b * b - xf * xf;
            if (rr <= 0.0) return 0.0;
            const double rho = std::sqrt(rr);
            return std::max(0.0, std::min(y1, rho) - std::max(y0, -rho));
        },
        z0, z1, std::move(splits));
}

} // namespace

HornGrid build_grid(const BoundaryCurve& curve, int dimension, double truncation,
                    double resolution) {
    if (dimension != 2 && dimension != 3)
        throw std::invalid_argument("build_grid: dimension must be 2 or 3");
    if (!(truncation > 0.0) || !(resolution > 0.0))
        throw std::invalid_argument("build_grid: truncation and resolution must be positive");
    const double mouth = curve.value(0.0);
    if (resolution > mouth / 4.0) {
        std::ostringstream os;
        os << "build_grid: resolution " << resolution
           << " cannot resolve the horn mouth; need at most b(0)/4 = " << mouth / 4.0;
        throw std::invalid_argument(os.str());
    }
    const auto nx = static_cast<std::int64_t>(std::ceil(truncation / resolution - 1e-9));
    if (nx < 8) {
        std::ostringstream os;
        os << "build_grid: only " << nx << " axial columns; need at least 8 "
           << "(enlarge truncation or use resolution <= " << truncation / 8.0 << ")";
        throw std::invalid_argument(os.str());
    }
    if (nx >= (1 << 20))
        throw std::invalid_argument("build_grid: axial extent overflows the lattice key");

    HornGrid g;
    g.dimension = dimension;
    g.curve = curve;
    g.resolution = resolution;
    g.truncation = double(nx) * resolution;

    const double res = resolution;
    const double drop = 1e-14 * std::pow(res, dimension);
    const double full = std::pow(res, dimension);

    auto push_cell = [&](std::int32_t i, std::int32_t j, std::int32_t k,
                         double cx, double cy, double cz, double m, bool clipped_axis) {
        if (m <= drop) return;
        const bool clipped = m < full * (1.0 - 1e-12);
        g.index.emplace(HornGrid::key(i, j, k), static_cast<std::int32_t>(g.centers.size()));
        g.lattice.push_back({i, j, k});
        g.centers.push_back({cx, cy, cz});
        g.measure.push_back(m);
        g.boundary.push_back((clipped || clipped_axis) ? 1 : 0);
        g.measure_total += m;
    };

    if (dimension == 2) {
        for (std::int32_t i = 0; i < nx; ++i) {
            const double x0 = i * res, x1 = x0 + res;
            const double bmax = curve.value(x0);
            for (std::int32_t j = 0; j * res < bmax; ++j) {
                const double m = cell_measure_2d(curve, x0, x1, j * res, res);
                push_cell(i, j, 0, x0 + res / 2.0, (j + 0.5) * res, 0.0, m,
                          i == 0 || j == 0);
            }
        }
        const double face_drop = 1e-14 * res;
        for (std::size_t c = 0; c < g.n_cells(); ++c) {
            const auto lat = g.lattice[c];
            const std::int32_t i = lat[0], j = lat[1];
            if (auto nb = g.cell_at(i + 1, j, 0); nb >= 0) {
                const double len =
                    std::clamp(curve.value((i + 1) * res) - j * res, 0.0, res);
                if (len > face_drop)
                    g.faces.push_back({static_cast<std::int32_t>(c), nb, 0, len, res});
            }
            if (auto nb = g.cell_at(i, j + 1, 0); nb >= 0) {
                const double len =
                    std::clamp(curve.inverse((j + 1) * res) - i * res, 0.0, res);
                if (len > face_drop)
                    g.faces.push_back({static_cast<std::int32_t>(c), nb, 1, len, res});
            }
        }
    } else {
        for (std::int32_t k = 0; k < nx; ++k) {
            const double z0 = k * res, z1 = z0 + res;
            const double rmax = curve.value(z0);
            const auto ir = static_cast<std::int32_t>(std::ceil(rmax / res));
            for (std::int32_t i = -ir; i < ir; ++i) {
                const double x0 = i * res, x1 = x0 + res;
                for (std::int32_t j = -ir; j < ir; ++j) {
                    const double y0 = j * res, y1 = y0 + res;
                    if (std::hypot(interval_origin_distance(x0, x1),
                                   interval_origin_distance(y0, y1)) >= rmax)
                        continue;
                    const double m = cell_measure_3d(curve, x0, x1, y0, y1, z0, z1);
                    push_cell(i, j, k, x0 + res / 2.0, y0 + res / 2.0,
                              z0 + res / 2.0, m, k == 0);
                }
            }
        }
        const double face_drop = 1e-14 * res * res;
        for (std::size_t c = 0; c < g.n_cells(); ++c) {
            const auto lat = g.lattice[c];
            const std::int32_t i = lat[0], j = lat[1], k = lat[2];
            const double x0 = i * res, y0 = j * res, z0 = k * res;
            if (auto nb = g.cell_at(i + 1, j, k); nb >= 0) {
                const double a = side_face_area_3d(curve, x0 + res, y0, y0 + res,
                                                   z0, z0 + res);
                if (a > face_drop)
                    g.faces.push_back({static_cast<std::int32_t>(c), nb, 0, a, res});
            }
            if (auto nb = g.cell_at(i, j + 1, k); nb >= 0) {
                const double a = side_face_area_3d(curve, y0 + res, x0, x0 + res,
                                                   z0, z0 + res);
                if (a > face_drop)
                    g.faces.push_back({static_cast<std::int32_t>(c), nb, 1, a, res});
            }
            if (auto nb = g.cell_at(i, j, k + 1); nb >= 0) {
                const double a =
                    box_disk_area(x0, x0 + res, y0, y0 + res, curve.value(z0 + res));
                if (a > face_drop)
                    g.faces.push_back({static_cast<std::int32_t>(c), nb, 2, a, res});
            }
        }
    }

    g.tail_measure = horn_tail_measure(curve, dimension, g.truncation);
    return g;
}

double tail_mass(const HornGrid& grid, const std::vector<double>& field, double L_cut) {
    if (field.size() != grid.n_cells())
        throw std::invalid_argument("tail_mass: field does not match the grid");
    double s = 0.0;
    for (std::size_t c = 0; c < grid.n_cells(); ++c)
        if (grid.axial(c) > L_cut) s += grid.measure[c] * field[c] * field[c];
    return s;
}

double l2_norm(const HornGrid& grid, const std::vector<double>& field) {
    if (field.size() != grid.n_cells())
        throw std::invalid_argument("l2_norm: field does not match the grid");
    double s = 0.0;
    for (std::size_t c = 0; c < grid.n_cells(); ++c)
        s += grid.measure[c] * field[c] * field[c];
    return std::sqrt(s);
}

double h1_seminorm(const HornGrid& grid, const std::vector<double>& field) {
    if (field.size() != grid.n_cells())
        throw std::invalid_argument("h1_seminorm: field does not match the grid");
    double s = 0.0;
    for (const auto& f : grid.faces) {
        const double d = field[f.a] - field[f.b];
        s += f.measure / f.dist * d * d;
    }
    return std::sqrt(s);
}

std::vector<double> restrict_field(const HornGrid& fine, const HornGrid& coarse,
                                   const std::vector<double>& field) {
    if (field.size() != fine.n_cells())
        throw std::invalid_argument("restrict_field: field does not match the fine grid");
    if (fine.dimension != coarse.dimension)
        throw std::invalid_argument("restrict_field: dimension mismatch");
    if (fine.curve.family() != coarse.curve.family() ||
        fine.curve.parameter() != coarse.curve.parameter())
        throw std::invalid_argument("restrict_field: profile mismatch");
    const double ratio_real = coarse.resolution / fine.resolution;
    const auto ratio = static_cast<std::int32_t>(std::llround(ratio_real));
    if (ratio < 2 || std::abs(ratio_real - ratio) > 1e-9 * ratio ||
        (ratio & (ratio - 1)) != 0)
        throw std::invalid_argument(
            "restrict_field: fine resolution must be coarse / 2^k");
    if (fine.truncation < coarse.truncation - 1e-12)
        throw std::invalid_argument("restrict_field: fine grid truncated short");

    const std::int32_t rk = coarse.dimension == 3 ? ratio : 1;
    std::vector<double> out(coarse.n_cells(), 0.0);
    for (std::size_t c = 0; c < coarse.n_cells(); ++c) {
        const auto lat = coarse.lattice[c];
        double mass = 0.0, sum = 0.0;
        for (std::int32_t di = 0; di < ratio; ++di)
            for (std::int32_t dj = 0; dj < ratio; ++dj)
                for (std::int32_t dk = 0; dk < rk; ++dk) {
                    const auto id = fine.cell_at(ratio * lat[0] + di,
                                                 ratio * lat[1] + dj,
                                                 rk == 1 ? 0 : ratio * lat[2] + dk);
                    if (id < 0) continue;
                    mass += fine.measure[id];
                    sum += fine.measure[id] * field[id];
                }
        out[c] = mass > 0.0 ? sum / mass : 0.0;
    }
    return out;
}

double horn_tail_measure(const BoundaryCurve& curve, int dimension, double L) {
    if (dimension != 2 && dimension != 3)
        throw std::invalid_argument("horn_tail_measure: dimension must be 2 or 3");
    if (L < 0.0) throw std::invalid_argument("horn_tail_measure: L must be nonnegative");
    const double log_pi = std::log(std::acos(-1.0));
    auto weight = [&](double u) { // x = L + u/(1-u), dx = du/(1-u)^2
        const double x = L + u / (1.0 - u);
        const double lw = dimension == 2 ? curve.log_value(x)
                                         : log_pi + 2.0 * curve.log_value(x);
        const double lg = lw - 2.0 * std::log1p(-u);
        return lg < -745.0 ? 0.0 : std::exp(lg);
    };
    const int panels = 64;
    double s = 0.0;
    for (int p = 0; p < panels; ++p)
        s += gauss8(weight, double(p) / panels, double(p + 1) / panels);
    return s;
}

} // namespace fspde
