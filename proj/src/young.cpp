#include "fspde/young.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fspde {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 0.5))
        throw std::invalid_argument("young: alpha must lie in (0, 1/2)");
}

/// max_b |D(a, b)| for one left node a, the inner integral accumulated
/// segment by segment as the right node sweeps outward.
double row_sup(const std::vector<double>& v, const std::vector<double>& t,
               std::size_t a, double alpha) {
    double inner = 0.0; // int_{t_a}^{t_b} (B(t_a) - B(tau)) (tau - t_a)^{alpha-2} dtau
    double best = 0.0;
    const std::size_t n = v.size() - 1;
    for (std::size_t b = a + 1; b <= n; ++b) {
        const std::size_t k = b - 1; // segment [t_k, t_{k+1}] joins the integral
        const double u0 = t[k] - t[a];
        const double u1 = t[b] - t[a];
        const double slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
        if (u0 == 0.0) {
            // first segment: B(t_a) - B(tau) = -slope (tau - t_a)
            inner += -slope * std::pow(u1, alpha) / alpha;
        } else {
            const double c = (v[a] - v[k]) + slope * u0; // value at the u-origin
            inner += c * (std::pow(u1, alpha - 1.0) - std::pow(u0, alpha - 1.0)) / (alpha - 1.0)
                   - slope * (std::pow(u1, alpha) - std::pow(u0, alpha)) / alpha;
        }
        const double d = (v[a] - v[b]) / std::pow(u1, 1.0 - alpha) + (1.0 - alpha) * inner;
        best = std::max(best, std::abs(d));
    }
    return best;
}

double lambda_from_rows(const std::vector<double>& v, const TimeGrid& grid, double alpha,
                        bool parallel) {
    check_alpha(alpha);
    if (v.size() != grid.n_steps() + 1)
        throw std::invalid_argument("estimate_lambda: values do not match the grid");
    const std::vector<double>& t = grid.nodes();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grid.n_steps());
    std::vector<double> row(n, 0.0);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t a = 0; a < n; ++a) row[a] = row_sup(v, t, a, alpha);
    } else {
        for (std::ptrdiff_t a = 0; a < n; ++a) row[a] = row_sup(v, t, a, alpha);
    }
    double sup = 0.0;
    for (double r : row) sup = std::max(sup, r); // serial fold, thread-count free
    return std::sin(M_PI * alpha) / M_PI * sup;
}

/// Closed form of int |c + s*w| w^{-alpha} dw over [w0, w1], 0 <= w0 < w1,
/// splitting at the sign change of the linear factor.
double abs_linear_against_weight(double c, double s, double w0, double w1, double alpha) {
    auto piece = [&](double lo, double hi, double sign) {
        auto prim = [&](double w) {
            return c * std::pow(w, 1.0 - alpha) / (1.0 - alpha)
                 + s * std::pow(w, 2.0 - alpha) / (2.0 - alpha);
        };
        return sign * (prim(hi) - prim(lo));
    };
    if (s != 0.0) {
        double root = -c / s;
        if (root > w0 && root < w1) {
            double sign_lo = (c + s * w0 >= 0.0) ? 1.0 : -1.0;
            return piece(w0, root, sign_lo) + piece(root, w1, -sign_lo);
        }
    }
    double mid = c + s * 0.5 * (w0 + w1);
    return piece(w0, w1, mid >= 0.0 ? 1.0 : -1.0);
}

/// Closed form of int |d(w)| w^{-alpha-1} dw over [w0, w1] with d linear in w,
/// d(w0) = d0, d(w1) = d1. When w0 == 0 the linear factor must vanish there.
double abs_linear_against_singular(double d0, double d1, double w0, double w1, double alpha) {
    const double slope = (d1 - d0) / (w1 - w0);
    const double c = d0 - slope * w0; // value extrapolated to w = 0
    auto prim = [&](double w) {
        double acc = slope * std::pow(w, 1.0 - alpha) / (1.0 - alpha);
        if (c != 0.0) acc += c * std::pow(w, -alpha) / (-alpha);
        return acc;
    };
    auto piece = [&](double lo, double hi, double sign) { return sign * (prim(hi) - prim(lo)); };
    if (w0 == 0.0 && c != 0.0)
        throw std::logic_error("young: singular kernel against a non-vanishing factor");
    if (slope != 0.0) {
        double root = -c / slope;
        if (root > w0 && root < w1) {
            double sign_lo = (c + slope * w0 >= 0.0) ? 1.0 : -1.0;
            // at w0 == 0 the factor vanishes; take the sign just right of it
            if (w0 == 0.0) sign_lo = (slope >= 0.0) ? 1.0 : -1.0;
            return piece(w0, root, sign_lo) + piece(root, w1, -sign_lo);
        }
    }
    double mid = c + slope * 0.5 * (w0 + w1);
    return piece(w0, w1, mid >= 0.0 ? 1.0 : -1.0);
}

} // namespace

double young_integrate(const IntegrandPath& f, const FbmPath& B, double t_from, double t_to) {
    if (!(f.grid == B.grid))
        throw std::invalid_argument("young_integrate: integrand and path grids differ");
    if (f.values.size() != f.grid.n_steps() + 1 || B.values.size() != f.values.size())
        throw std::invalid_argument("young_integrate: value count does not match the grid");
    std::size_t a = f.grid.index_of(t_from);
    std::size_t b = f.grid.index_of(t_to);
    if (a >= b)
        throw std::invalid_argument("young_integrate: need t_from < t_to");
    double acc = 0.0;
    for (std::size_t k = a; k < b; ++k) acc += f.values[k] * (B.values[k + 1] - B.values[k]);
    return acc;
}

double estimate_lambda(const std::vector<double>& values, const TimeGrid& grid, double alpha) {
    return lambda_from_rows(values, grid, alpha, true);
}

double estimate_lambda_serial(const std::vector<double>& values, const TimeGrid& grid,
                              double alpha) {
    return lambda_from_rows(values, grid, alpha, false);
}

double estimate_lambda(const FbmPath& B, double alpha) {
    return estimate_lambda(B.values, B.grid, alpha);
}

double stieltjes_weight(const IntegrandPath& f, double alpha, double t_from, double t_to) {
    check_alpha(alpha);
    if (f.values.size() != f.grid.n_steps() + 1)
        throw std::invalid_argument("stieltjes_weight: values do not match the grid");
    const std::size_t a = f.grid.index_of(t_from);
    const std::size_t b = f.grid.index_of(t_to);
    if (a >= b)
        throw std::invalid_argument("stieltjes_weight: need t_from < t_to");
    const std::vector<double>& t = f.grid.nodes();
    const std::vector<double>& v = f.values;

    // first kernel: int |f(tau)| (tau - t_from)^{-alpha}, exact per segment
    double first = 0.0;
    for (std::size_t k = a; k < b; ++k) {
        double u0 = t[k] - t[a];
        double u1 = t[k + 1] - t[a];
        double slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k]);
        double c = v[k] - slope * u0; // |f| as |c + slope*u| on [u0, u1]
        first += abs_linear_against_weight(c, slope, u0, u1, alpha);
    }

    // second kernel: alpha * int G(tau) dtau with
    // G(tau) = int |f(tau)-f(rho)| (tau-rho)^{-alpha-1} drho exact per node,
    // trapezoid in the outer smooth layer
    double second = 0.0;
    double prev_g = 0.0; // G at t_a vanishes
    for (std::size_t m = a + 1; m <= b; ++m) {
        double g = 0.0;
        for (std::size_t k = a; k < m; ++k) {
            double w1 = t[m] - t[k];
            double w0 = (k + 1 == m) ? 0.0 : t[m] - t[k + 1];
            double d1 = v[m] - v[k];     // at w = w1
            double d0 = v[m] - v[k + 1]; // at w = w0
            g += abs_linear_against_singular(d0, d1, w0, w1, alpha);
        }
        second += 0.5 * (prev_g + g) * (t[m] - t[m - 1]);
        prev_g = g;
    }
    return first + alpha * second;
}

double stieltjes_bound(const IntegrandPath& f, const FbmPath& B, double alpha,
                       double t_from, double t_to) {
    if (!(f.grid == B.grid))
        throw std::invalid_argument("stieltjes_bound: integrand and path grids differ");
    return estimate_lambda(B, alpha) * stieltjes_weight(f, alpha, t_from, t_to);
}

double holder_exponent(const std::vector<double>& values, const TimeGrid& grid) {
    const std::size_t n = grid.n_steps();
    if (values.size() != n + 1)
        throw std::invalid_argument("holder_exponent: values do not match the grid");
    if (n + 1 < 33)
        throw std::invalid_argument("holder_exponent: need at least 32 intervals");
    std::vector<double> lx, ly;
    for (std::size_t lag = 1; lag <= n / 4; lag *= 2) {
        double sup = 0.0;
        for (std::size_t k = 0; k + lag <= n; ++k)
            sup = std::max(sup, std::abs(values[k + lag] - values[k]));
        if (sup > 0.0) {
            lx.push_back(std::log(static_cast<double>(lag) * grid.dt()));
            ly.push_back(std::log(sup));
        }
    }
    if (lx.size() < 2) return std::numeric_limits<double>::infinity();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= lx.size();
    my /= lx.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

} // namespace fspde
