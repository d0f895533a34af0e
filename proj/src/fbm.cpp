#include "fspde/fbm.hpp"

#include <fftw3.h>
#include <omp.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>

#include "fspde/rng.hpp"

namespace fspde {

namespace {

void check_hurst(double hurst) {
    if (!(hurst > 0.0) || !(hurst < 1.0))
        throw std::invalid_argument("fbm: Hurst parameter must lie in (0, 1)");
}

/// Autocovariance of unit-spacing fractional Gaussian noise at lag m.
double fgn_rho(double hurst, std::size_t m) {
    const double h2 = 2.0 * hurst;
    const double x = static_cast<double>(m);
    if (m == 0) return 1.0;
    return 0.5 * (std::pow(x + 1.0, h2) - 2.0 * std::pow(x, h2) + std::pow(x - 1.0, h2));
}

/// Shared per-(H, grid) sampling state: either a Cholesky factor of the
/// increment covariance or the spectral square roots of its circulant
/// embedding. Building it is the expensive part; drawing a path is cheap.
struct Sampler {
    double hurst;
    TimeGrid grid;
    FbmMethod method;
    double scale;                 // dt^H, applied to unit-spacing increments
    Eigen::MatrixXd chol_factor;  // lower triangular, cholesky only
    std::vector<double> spec_sqrt; // sqrt(eigenvalue / weight), circulant only
    fftw_plan plan = nullptr;     // executed on per-thread buffers
    std::size_t embed = 0;        // 2 * n_steps

    Sampler(double H, const TimeGrid& g, FbmMethod m) : hurst(H), grid(g), method(m) {
        check_hurst(H);
        scale = std::pow(g.dt(), H);
        const std::size_t n = g.n_steps();
        if (method == FbmMethod::cholesky) {
            Eigen::MatrixXd cov(n, n);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k <= j; ++k)
                    cov(j, k) = cov(k, j) = fgn_rho(H, j - k);
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error(
                    "fbm: increment covariance factorization failed "
                    "(numerical degeneracy at this step count)");
            chol_factor = llt.matrixL();
        } else {
            if ((n & (n - 1)) != 0 || n < 2)
                throw std::invalid_argument(
                    "fbm: circulant sampling needs a power-of-two step count; "
                    "use the cholesky method for general grids");
            embed = 2 * n;
            // first row of the circulant embedding of the Toeplitz covariance
            std::vector<std::complex<double>> row(embed), freq(embed);
            for (std::size_t j = 0; j <= n; ++j) row[j] = fgn_rho(H, j);
            for (std::size_t j = 1; j < n; ++j) row[embed - j] = fgn_rho(H, j);
            fftw_plan p = fftw_plan_dft_1d(static_cast<int>(embed),
                                           reinterpret_cast<fftw_complex*>(row.data()),
                                           reinterpret_cast<fftw_complex*>(freq.data()),
                                           FFTW_FORWARD, FFTW_ESTIMATE);
            fftw_execute(p);
            fftw_destroy_plan(p);
            spec_sqrt.resize(embed);
            for (std::size_t j = 0; j < embed; ++j) {
                double lam = freq[j].real();
                if (lam < 0.0)
                    throw std::runtime_error(
                        "fbm: circulant embedding has a negative eigenvalue; "
                        "refusing to regularize");
                // halves of a conjugate pair carry half the weight
                double w = (j == 0 || j == n) ? 1.0 : 0.5;
                spec_sqrt[j] = std::sqrt(lam * w / static_cast<double>(embed));
            }
            // plan once on scratch buffers; fftw_execute_dft is thread-safe
            auto* scratch = fftw_alloc_complex(embed);
            plan = fftw_plan_dft_1d(static_cast<int>(embed), scratch, scratch,
                                    FFTW_FORWARD, FFTW_ESTIMATE);
            fftw_free(scratch);
        }
    }

    ~Sampler() {
        if (plan) fftw_destroy_plan(plan);
    }

    FbmPath draw(std::uint64_t seed) const {
        const std::size_t n = grid.n_steps();
        FbmPath path;
        path.hurst = hurst;
        path.grid = grid;
        path.seed = seed;
        path.values.assign(n + 1, 0.0);
        if (method == FbmMethod::cholesky) {
            std::vector<double> z = standard_normals(seed, n);
            Eigen::Map<const Eigen::VectorXd> zv(z.data(), n);
            Eigen::VectorXd inc = chol_factor * zv;
            for (std::size_t k = 0; k < n; ++k)
                path.values[k + 1] = path.values[k] + scale * inc[k];
        } else {
            std::vector<double> z = standard_normals(seed, embed);
            auto* buf = fftw_alloc_complex(embed);
            // index 0 and n are real; pair (j, embed-j) shares (z_{2j}, z_{2j+1})
            buf[0][0] = spec_sqrt[0] * z[0];
            buf[0][1] = 0.0;
            buf[n][0] = spec_sqrt[n] * z[1];
            buf[n][1] = 0.0;
            for (std::size_t j = 1; j < n; ++j) {
                double re = spec_sqrt[j] * z[2 * j];
                double im = spec_sqrt[j] * z[2 * j + 1];
                buf[j][0] = re;
                buf[j][1] = im;
                buf[embed - j][0] = re;
                buf[embed - j][1] = -im;
            }
            fftw_execute_dft(plan, buf, buf);
            for (std::size_t k = 0; k < n; ++k)
                path.values[k + 1] = path.values[k] + scale * buf[k][0];
            fftw_free(buf);
        }
        return path;
    }
};

} // namespace

double fbm_covariance(double hurst, double s, double t) {
    check_hurst(hurst);
    if (s < 0.0 || t < 0.0)
        throw std::invalid_argument("fbm_covariance: times must be nonnegative");
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(s - t), h2));
}

FbmPath sample_fbm(double hurst, const TimeGrid& grid, std::uint64_t seed, FbmMethod method) {
    return Sampler(hurst, grid, method).draw(seed);
}

std::vector<FbmPath> sample_fbm_family(const HurstSequence& hs, const TimeGrid& grid,
                                       std::uint64_t seed, std::size_t count) {
    if (count > hs.values.size())
        throw std::invalid_argument("sample_fbm_family: count exceeds the Hurst sequence");
    // one sampler per distinct Hurst value; factorizations are reused
    std::vector<FbmPath> out(count);
    std::vector<std::unique_ptr<Sampler>> cache;
    std::vector<double> cached_h;
    for (std::size_t i = 0; i < count; ++i) {
        double h = hs.values[i];
        std::size_t c = 0;
        for (; c < cached_h.size(); ++c)
            if (cached_h[c] == h) break;
        if (c == cached_h.size()) {
            cache.push_back(std::make_unique<Sampler>(h, grid, FbmMethod::cholesky));
            cached_h.push_back(h);
        }
        out[i] = cache[c]->draw(derive_subseed(seed, i));
    }
    return out;
}

std::vector<FbmPath> sample_fbm_ensemble(double hurst, const TimeGrid& grid,
                                         std::uint64_t seed, std::size_t count,
                                         FbmMethod method) {
    Sampler sampler(hurst, grid, method);
    std::vector<FbmPath> out(count);
    // independent slots, per-index seeds: output does not depend on scheduling
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        out[i] = sampler.draw(derive_subseed(seed, i));
    return out;
}

FbmPath subdivide_increments(const FbmPath& path, std::size_t factor) {
    if (factor == 0)
        throw std::invalid_argument("subdivide_increments: factor must be positive");
    FbmPath fine;
    fine.hurst = path.hurst;
    fine.seed = path.seed;
    fine.grid = path.grid.refined(factor);
    const std::size_t n = path.grid.n_steps();
    fine.values.assign(n * factor + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double part = path.increment(k) / static_cast<double>(factor);
        for (std::size_t r = 0; r < factor; ++r)
            fine.values[k * factor + r + 1] = fine.values[k * factor + r] + part;
    }
    return fine;
}

FbmPath coarsen(const FbmPath& path, std::size_t factor) {
    const std::size_t n = path.grid.n_steps();
    if (factor == 0 || n % factor != 0)
        throw std::invalid_argument("coarsen: factor must divide the step count");
    FbmPath coarse;
    coarse.hurst = path.hurst;
    coarse.seed = path.seed;
    coarse.grid = TimeGrid(path.grid.horizon(), n / factor);
    coarse.values.resize(n / factor + 1);
    for (std::size_t k = 0; k <= n / factor; ++k)
        coarse.values[k] = path.values[k * factor];
    return coarse;
}

} // namespace fspde
