#include "fspde/grr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fspde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 4-point Gauss-Legendre rule on [0,1]
constexpr double kGx[4] = {0.06943184420297371, 0.33000947820757187,
                           0.6699905217924281, 0.9305681557970262};
constexpr double kGw[4] = {0.17392742256872693, 0.32607257743127307,
                           0.32607257743127307, 0.17392742256872693};

// running log-sum-exp; exact up to rounding for any magnitude spread
struct LogAcc {
    double peak = -kInf;
    double sum = 0.0; // sum of exp(term - peak)

    void add(double lg) {
        if (lg == -kInf) return;
        if (lg <= peak) {
            sum += std::exp(lg - peak);
        } else {
            sum = sum * std::exp(peak - lg) + 1.0;
            peak = lg;
        }
    }

    double log_value() const {
        if (sum <= 0.0) return -kInf;
        return peak + std::log(sum);
    }
};

void check_grr_args(const std::vector<double>& values, const TimeGrid& grid,
                    double q, double beta) {
    if (values.size() != grid.n_steps() + 1)
        throw std::invalid_argument("grr: values do not match the grid");
    if (!(q >= 1.0))
        throw std::invalid_argument("grr: exponent q must be at least 1");
    if (!(beta > 0.0) || !(beta < 1.0))
        throw std::invalid_argument("grr: beta must lie in (0,1)");
}

// log of the contribution of every cell pair (i, j >= i), both orderings of
// (s, t) counted. Within one cell |f(s)-f(t)| = |slope| |s-t|, a closed form.
// The pair (i, i+1) touches the diagonal at one corner where the integrand is
// exactly homogeneous of degree p = q - beta*q - 1 in the corner coordinates,
// so dyadic shells form an exact geometric series: one quadratured shell plus
// the analytic tail factor 1/(1 - 2^{-(p+2)}). Everything farther from the
// diagonal is smooth and a fixed Gauss panel suffices.
double row_contribution(const std::vector<double>& v, const TimeGrid& grid,
                        std::size_t i, double q, double beta) {
    const std::size_t n = grid.n_steps();
    const double h = grid.dt();
    const double log_h = std::log(h);
    const double kernel = beta * q + 1.0; // exponent under |s-t|
    const double p = q - kernel;          // homogeneity degree near a corner
    const double log2 = std::log(2.0);

    LogAcc acc;

    const double s_i = (v[i + 1] - v[i]) / h;

    // same cell
    if (s_i != 0.0) {
        acc.add(log2 + q * std::log(std::abs(s_i)) + (p + 2.0) * log_h -
                std::log(p + 1.0) - std::log(p + 2.0));
    }

    // corner-touching neighbour
    if (i + 1 < n) {
        const double s_r = (v[i + 2] - v[i + 1]) / h;
        if (s_i != 0.0 || s_r != 0.0) {
            // outermost shell [0,h]^2 \ [0,h/2]^2 as three boxes, each cut
            // into 2x2 panels of tensor Gauss points
            LogAcc shell;
            const double boxes[3][4] = {{0.5, 1.0, 0.0, 0.5},
                                        {0.0, 0.5, 0.5, 1.0},
                                        {0.5, 1.0, 0.5, 1.0}};
            for (const auto& b : boxes) {
                const double wx = (b[1] - b[0]) / 2.0, wy = (b[3] - b[2]) / 2.0;
                for (int px = 0; px < 2; ++px)
                    for (int py = 0; py < 2; ++py) {
                        const double x0 = b[0] + px * wx, y0 = b[2] + py * wy;
                        for (int a = 0; a < 4; ++a)
                            for (int c = 0; c < 4; ++c) {
                                const double sig = (x0 + kGx[a] * wx) * h;
                                const double tau = (y0 + kGx[c] * wy) * h;
                                const double df = s_r * sig + s_i * tau;
                                if (df == 0.0) continue;
                                shell.add(q * std::log(std::abs(df)) -
                                          kernel * std::log(sig + tau) +
                                          std::log(kGw[a] * kGw[c] * wx * wy) +
                                          2.0 * log_h);
                            }
                    }
            }
            const double ratio = std::exp(-(p + 2.0) * log2); // < 1/2 always
            acc.add(log2 + shell.log_value() - std::log1p(-ratio));
        }
    }

    // separated cells: smooth integrand, plain Gauss panel per pair
    for (std::size_t j = i + 2; j < n; ++j) {
        const double s_j = (v[j + 1] - v[j]) / h;
        const double ti = grid.node(i), tj = grid.node(j);
        for (int a = 0; a < 4; ++a) {
            const double sig = tj + kGx[a] * h;
            const double f_sig = v[j] + s_j * kGx[a] * h;
            for (int c = 0; c < 4; ++c) {
                const double tau = ti + kGx[c] * h;
                const double df = f_sig - (v[i] + s_i * kGx[c] * h);
                if (df == 0.0) continue;
                acc.add(q * std::log(std::abs(df)) -
                        kernel * std::log(sig - tau) +
                        std::log(2.0 * kGw[a] * kGw[c]) + 2.0 * log_h);
            }
        }
    }

    return acc.log_value();
}

double fold_rows(const std::vector<double>& rows) {
    LogAcc acc;
    for (double r : rows) acc.add(r);
    return acc.log_value();
}

} // namespace

double log_grr_functional(const std::vector<double>& values, const TimeGrid& grid,
                          double q, double beta) {
    check_grr_args(values, grid, q, beta);
    const std::size_t n = grid.n_steps();
    std::vector<double> rows(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        rows[static_cast<std::size_t>(i)] =
            row_contribution(values, grid, static_cast<std::size_t>(i), q, beta);
    return fold_rows(rows);
}

double log_grr_functional_serial(const std::vector<double>& values, const TimeGrid& grid,
                                 double q, double beta) {
    check_grr_args(values, grid, q, beta);
    const std::size_t n = grid.n_steps();
    std::vector<double> rows(n);
    for (std::size_t i = 0; i < n; ++i)
        rows[i] = row_contribution(values, grid, i, q, beta);
    return fold_rows(rows);
}

double grr_functional(const std::vector<double>& values, const TimeGrid& grid,
                      double q, double beta) {
    const double lg = log_grr_functional(values, grid, q, beta);
    if (lg == -kInf) return 0.0;
    return std::exp(lg);
}

double grr_constant(double beta, double q, double c_T) {
    if (!(q >= 1.0)) throw std::invalid_argument("grr_constant: q must be at least 1");
    if (!(beta > 1.0 / q) || !(beta < 1.0))
        throw std::invalid_argument("grr_constant: beta must lie in (1/q, 1)");
    if (!(c_T > 0.0)) throw std::invalid_argument("grr_constant: c_T must be positive");
    return c_T * (beta + 1.0 / q) / (beta - 1.0 / q);
}

GrrCheckResult grr_check(const std::vector<double>& values, const TimeGrid& grid,
                         double q, double beta, double c_T) {
    GrrCheckResult res;
    res.constant = grr_constant(beta, q, c_T);
    res.log_functional = log_grr_functional(values, grid, q, beta);

    if (res.log_functional == -kInf) {
        // flat path: both sides vanish
        res.max_ratio = 0.0;
        res.pass = true;
        return res;
    }

    const std::size_t m = grid.n_steps() + 1;
    const double expo = beta - 1.0 / q;
    const double log_bound_base = std::log(res.constant) + res.log_functional / q;

    std::vector<double> best(m - 1, -kInf);
    std::vector<std::size_t> best_hi(m - 1, 0);
#pragma omp parallel for schedule(static)
    for (long long a = 0; a < static_cast<long long>(m) - 1; ++a) {
        const std::size_t lo = static_cast<std::size_t>(a);
        double row_best = -kInf;
        std::size_t row_hi = lo + 1;
        for (std::size_t b = lo + 1; b < m; ++b) {
            const double df = std::abs(values[b] - values[lo]);
            if (df == 0.0) continue;
            const double w = grid.node(b) - grid.node(lo);
            const double lr = std::log(df) - (log_bound_base + expo * std::log(w));
            if (lr > row_best) {
                row_best = lr;
                row_hi = b;
            }
        }
        best[lo] = row_best;
        best_hi[lo] = row_hi;
    }

    double top = -kInf;
    for (std::size_t lo = 0; lo + 1 < m; ++lo) {
        if (best[lo] > top) {
            top = best[lo];
            res.worst_lo = lo;
            res.worst_hi = best_hi[lo];
        }
    }
    res.max_ratio = (top == -kInf) ? 0.0 : std::exp(top);
    res.pass = res.max_ratio <= 1.0;
    return res;
}

double theta_estimate(const FbmPath& path, double eps) {
    const double H = path.hurst;
    if (!(eps > 0.0) || !(eps < 2.0 * H - 1.0))
        throw std::invalid_argument("theta_estimate: eps must lie in (0, 2H-1)");
    const double q = 2.0 / eps;
    const double beta = H - eps / 2.0;
    const double lg = log_grr_functional(path.values, path.grid, q, beta);
    if (lg == -kInf) return 0.0;
    return std::exp(0.5 * eps * lg);
}

namespace {

ConstraintAudit audit_base(const HurstSequence& hs) {
    ConstraintAudit a;
    a.gamma = hs.gamma;
    a.h_min = hs.h_min();
    a.h_min_ok = a.h_min > 1.0 / (a.gamma + 1.0);
    a.alpha_lo = 1.0 - a.h_min;
    a.alpha_hi = a.gamma / (a.gamma + 1.0);
    a.alpha = std::numeric_limits<double>::quiet_NaN();
    return a;
}

} // namespace

ConstraintAudit constraint_audit(const HurstSequence& hs) { return audit_base(hs); }

ConstraintAudit constraint_audit(const HurstSequence& hs, double alpha) {
    ConstraintAudit a = audit_base(hs);
    a.alpha = alpha;
    a.alpha_ok = alpha > a.alpha_lo && alpha < a.alpha_hi;
    a.eps_hi = a.h_min - 1.0 + alpha;
    a.eps_canonical = a.eps_hi / 2.0;
    a.pass = a.h_min_ok && a.alpha_ok && a.eps_hi > 0.0;
    return a;
}

double lambda_chain_constant(double H_i, double h_min, double eps, double alpha,
                             double horizon, double c_T) {
    if (!(c_T > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("lambda_chain_constant: need positive c_T and horizon");
    if (!(h_min > 0.0) || !(h_min <= H_i) || !(H_i < 1.0))
        throw std::invalid_argument("lambda_chain_constant: need 0 < h_min <= H_i < 1");
    if (!(eps > 0.0) || !(eps < H_i))
        throw std::invalid_argument("lambda_chain_constant: need 0 < eps < H_i");
    const double denom = h_min - eps - 1.0 + alpha;
    if (!(denom > 0.0))
        throw std::invalid_argument("lambda_chain_constant: eps too large for this alpha");
    return c_T * H_i / (H_i - eps) * std::pow(std::max(1.0, horizon), H_i - h_min) *
           std::pow(horizon, denom) * (h_min - eps + alpha) / denom;
}

double calibrated_c_T() {
    // frozen corpus maximum times the 1.05 safety factor; provenance and the
    // regeneration recipe live in data/grr_calibration.json
    return 1.1240517462176163;
}

} // namespace fspde
