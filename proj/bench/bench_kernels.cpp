// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce the same numbers. The parallel variants fold
// serially, so agreement is expected to round-off, independent of the thread
// count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "fspde/fbm.hpp"
#include "fspde/grr.hpp"
#include "fspde/horn.hpp"
#include "fspde/rng.hpp"
#include "fspde/space_time.hpp"
#include "fspde/spectral.hpp"
#include "fspde/time_grid.hpp"
#include "fspde/young.hpp"

using namespace fspde;

namespace {

int g_mismatches = 0;

double time_best(int repeat, const std::function<double()>& fn, double& result) {
    double best = 1e300;
    for (int r = 0; r < repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        result = fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const std::string& name, int repeat, const std::function<double()>& serial,
         const std::function<double()>& parallel) {
    double rs = 0.0, rp = 0.0;
    const double ts = time_best(repeat, serial, rs);
    const double tp = time_best(repeat, parallel, rp);
    const double scale = std::max({std::abs(rs), std::abs(rp), 1.0});
    const double rel = std::abs(rs - rp) / scale;
    const bool ok = rel <= 1e-12;
    if (!ok) ++g_mismatches;
    std::printf("%-34s reference %9.3f ms   kernel %9.3f ms   speedup %5.2fx   rel diff %.2e %s\n",
                name.c_str(), ts, tp, ts / tp, rel, ok ? "" : "MISMATCH");
    std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmarks: OpenMP vs serial reference"};
    bool quick = false;
    int repeat = 3;
    app.add_flag("--quick", quick, "small problem sizes for smoke testing");
    app.add_option("--repeat", repeat, "timing repetitions, best is reported")
        ->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    std::printf("threads available: %d (results are identical for any count)\n",
                omp_get_max_threads());

    const std::size_t n_path = quick ? 256 : 1024;
    const TimeGrid grid(1.0, n_path);
    const auto B = sample_fbm(0.75, grid, 7);

    row("lambda functional n=" + std::to_string(n_path), repeat,
        [&] { return estimate_lambda_serial(B.values, grid, 0.3); },
        [&] { return estimate_lambda(B.values, grid, 0.3); });

    const double q = 32.0, beta = 0.71875;
    row("increment functional n=" + std::to_string(n_path), repeat,
        [&] { return log_grr_functional_serial(B.values, grid, q, beta); },
        [&] { return log_grr_functional(B.values, grid, q, beta); });

    const double res = quick ? 0.125 : 0.0625;
    const std::size_t n_steps = quick ? 64 : 128;
    const auto horn = std::make_shared<const HornGrid>(
        build_grid(BoundaryCurve::stretched_exp(1.0), 2, 4.0, res));
    const auto basis = build_basis(horn, 4, 4.0);
    SpaceTimeField u;
    u.grid = horn;
    u.time = TimeGrid(1.0, n_steps);
    u.values.resize(static_cast<Eigen::Index>(horn->n_cells()),
                    static_cast<Eigen::Index>(n_steps + 1));
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double pk = std::sin(3.141592653589793 * u.time.node(k));
        for (Eigen::Index c = 0; c < u.values.rows(); ++c)
            u.values(c, static_cast<Eigen::Index>(k)) = basis.modes(c, 1) * pk;
    }
    row("space-time norm cells=" + std::to_string(horn->n_cells()), repeat,
        [&] { return balpha_norm_sq_serial(u, 0.3); },
        [&] { return balpha_norm_sq(u, 0.3); });

    // the batched sampler must reproduce the one-at-a-time contract exactly:
    // path i of the ensemble is the path sampled with derive_subseed(seed, i).
    // Its gain comes from sharing one covariance factorization across paths
    // (and threads when available), not from threading alone.
    const std::size_t count = quick ? 64 : 256;
    const TimeGrid egrid(1.0, 512);
    row("fbm batched ensemble count=" + std::to_string(count), repeat,
        [&] {
            double sum = 0.0;
            for (std::size_t i = 0; i < count; ++i)
                sum += sample_fbm(0.75, egrid, derive_subseed(99, i)).values.back();
            return sum;
        },
        [&] {
            double sum = 0.0;
            for (const auto& p : sample_fbm_ensemble(0.75, egrid, 99, count))
                sum += p.values.back();
            return sum;
        });

    if (g_mismatches > 0) {
        std::printf("bench: %d kernel(s) disagree with their serial reference\n", g_mismatches);
        return 1;
    }
    std::printf("bench: all kernels agree with their serial references\n");
    return 0;
}
