#include "fspde/space_time.hpp"

#include <cmath>
#include <stdexcept>

namespace fspde {

namespace {

void check_field(const SpaceTimeField& u) {
    if (!u.grid) throw std::invalid_argument("space-time field: grid is null");
    if (u.values.rows() != static_cast<Eigen::Index>(u.grid->n_cells()) ||
        u.values.cols() != static_cast<Eigen::Index>(u.time.n_steps() + 1))
        throw std::invalid_argument("space-time field: value shape mismatch");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 0.5))
        throw std::invalid_argument("fractional norm: alpha must lie in (0, 1/2)");
}

double mass_dot(const HornGrid& g, const Eigen::MatrixXd& v, Eigen::Index a,
                Eigen::Index b) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.n_cells(); ++c)
        s += g.measure[c] * v(c, a) * v(c, b);
    return s;
}

double mass_norm_diff(const HornGrid& g, const Eigen::MatrixXd& v, Eigen::Index a,
                      Eigen::Index b) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.n_cells(); ++c) {
        const double d = v(c, a) - v(c, b);
        s += g.measure[c] * d * d;
    }
    return std::sqrt(s);
}

// inner integral at node k: int_0^{t_k} ||u(t_k)-u(tau)||_2 (t_k-tau)^{-a-1} dtau,
// exact for the linear-in-time interpolant of the nodal distances. Written in
// the gap variable w = t_k - tau the distance is linear per segment and
// vanishes at w = 0, so every piece including the singular one is a closed form.
double inner_row(const SpaceTimeField& u, std::size_t k, double alpha) {
    if (k == 0) return 0.0;
    const double dt = u.time.dt();
    const auto& g = *u.grid;

    double I = 0.0;
    double phi_next = 0.0; // distance at j = k is zero
    for (std::size_t j = k; j-- > 0;) {
        const double phi_j = mass_norm_diff(g, u.values, k, j);
        const double w0 = double(k - j) * dt;      // gap at node j
        const double w1 = double(k - j - 1) * dt;  // gap at node j+1
        const double m = (phi_j - phi_next) / dt;
        if (j + 1 == k) {
            I += m * std::pow(w0, 1.0 - alpha) / (1.0 - alpha);
        } else {
            const double c = phi_next - w1 * m;
            I += c * (std::pow(w1, -alpha) - std::pow(w0, -alpha)) / alpha +
                 m * (std::pow(w0, 1.0 - alpha) - std::pow(w1, 1.0 - alpha)) /
                     (1.0 - alpha);
        }
        phi_next = phi_j;
    }
    return I;
}

double assemble_balpha(const SpaceTimeField& u, double alpha,
                       const std::vector<double>& rows) {
    const std::size_t n = u.time.n_steps();
    const double dt = u.time.dt();

    double sup2 = 0.0;
    for (std::size_t k = 0; k <= n; ++k)
        sup2 = std::max(sup2, mass_dot(*u.grid, u.values, k, k));

    double J = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        J += w * rows[k] * rows[k];
    }
    return sup2 + dt * J;
}

} // namespace

std::vector<double> SpaceTimeField::column(std::size_t k) const {
    if (k >= static_cast<std::size_t>(values.cols()))
        throw std::invalid_argument("space-time field: column out of range");
    return std::vector<double>(values.col(k).data(),
                               values.col(k).data() + values.rows());
}

double balpha_norm_sq(const SpaceTimeField& u, double alpha) {
    check_field(u);
    check_alpha(alpha);
    const std::size_t n = u.time.n_steps();
    std::vector<double> rows(n + 1);
#pragma omp parallel for schedule(static)
    for (long long k = 0; k <= static_cast<long long>(n); ++k)
        rows[static_cast<std::size_t>(k)] =
            inner_row(u, static_cast<std::size_t>(k), alpha);
    return assemble_balpha(u, alpha, rows);
}

double balpha_norm_sq_serial(const SpaceTimeField& u, double alpha) {
    check_field(u);
    check_alpha(alpha);
    const std::size_t n = u.time.n_steps();
    std::vector<double> rows(n + 1);
    for (std::size_t k = 0; k <= n; ++k) rows[k] = inner_row(u, k, alpha);
    return assemble_balpha(u, alpha, rows);
}

double tensor_h1_norm_sq(const SpaceTimeField& u) {
    check_field(u);
    const auto& g = *u.grid;
    const std::size_t n = u.time.n_steps();
    const double dt = u.time.dt();

    auto dirichlet = [&](Eigen::Index a, Eigen::Index b) {
        double s = 0.0;
        for (const auto& f : g.faces)
            s += f.measure / f.dist * (u.values(f.a, a) - u.values(f.b, a)) *
                 (u.values(f.a, b) - u.values(f.b, b));
        return s;
    };

    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto a = static_cast<Eigen::Index>(k), b = a + 1;
        // exact integral of a quadratic along the segment
        const double l2 = (mass_dot(g, u.values, a, a) + mass_dot(g, u.values, a, b) +
                           mass_dot(g, u.values, b, b)) / 3.0;
        const double h1 = (dirichlet(a, a) + dirichlet(a, b) + dirichlet(b, b)) / 3.0;
        double dd = 0.0;
        for (std::size_t c = 0; c < g.n_cells(); ++c) {
            const double d = u.values(c, b) - u.values(c, a);
            dd += g.measure[c] * d * d;
        }
        total += dt * (l2 + h1) + dd / dt;
    }
    return total;
}

std::vector<double> trace_at(const SpaceTimeField& u, double t) {
    check_field(u);
    const double T = u.time.horizon();
    if (t < -1e-12 * T || t > T * (1.0 + 1e-12))
        throw std::invalid_argument("trace_at: t outside [0, T]");
    const std::size_t n = u.time.n_steps();
    const double dt = u.time.dt();
    auto k = static_cast<std::size_t>(std::min(std::max(t, 0.0) / dt, double(n - 1)));
    const double theta = std::clamp((t - u.time.node(k)) / dt, 0.0, 1.0);

    std::vector<double> out(u.grid->n_cells());
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = (1.0 - theta) * u.values(c, k) + theta * u.values(c, k + 1);
    return out;
}

EmbeddingReport embedding_check(const std::vector<SpaceTimeField>& corpus, double alpha) {
    if (corpus.empty())
        throw std::invalid_argument("embedding_check: corpus is empty");
    check_alpha(alpha);
    const double T = corpus.front().time.horizon();
    for (const auto& u : corpus) {
        check_field(u);
        if (std::abs(u.time.horizon() - T) > 1e-12 * T)
            throw std::invalid_argument("embedding_check: mixed horizons in the corpus");
    }

    EmbeddingReport rep;
    rep.corpus_size = corpus.size();
    rep.analytic_chain =
        std::sqrt(1.0 / std::tanh(T) + std::pow(T, 2.0 - 2.0 * alpha) /
                                           ((0.5 - alpha) * (0.5 - alpha) *
                                            (2.0 - 2.0 * alpha)));

    for (const auto& u : corpus) {
        const double ten = std::sqrt(tensor_h1_norm_sq(u));
        const double bal = std::sqrt(balpha_norm_sq(u, alpha));
        rep.ratios.push_back(ten > 0.0 ? bal / ten : 0.0);
        rep.c_emp = std::max(rep.c_emp, rep.ratios.back());

        const std::size_t n = u.time.n_steps();
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b <= n; ++b) {
                const double d = mass_norm_diff(*u.grid, u.values,
                                                static_cast<Eigen::Index>(b),
                                                static_cast<Eigen::Index>(a));
                const double gap = u.time.node(b) - u.time.node(a);
                if (ten > 0.0)
                    rep.increment_worst =
                        std::max(rep.increment_worst, d / (std::sqrt(gap) * ten));
            }
    }
    rep.increment_ok = rep.increment_worst <= 1.0 + 1e-9;
    return rep;
}

double balpha_norm(const SpaceTimeField& u, double alpha) {
    return std::sqrt(balpha_norm_sq(u, alpha));
}

double tensor_h1_norm(const SpaceTimeField& u) {
    return std::sqrt(tensor_h1_norm_sq(u));
}

} // namespace fspde
