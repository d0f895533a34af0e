// Regenerates the frozen continuity constant c_T used by grr_check. The
// corpus is the canonical Hurst sweep (1000 paths per value by default) plus
// three deterministic shapes; the frozen constant is the corpus maximum of
// the c_T = 1 ratio times a 1.05 safety factor. The result is written to
// data/grr_calibration.json and the literal in calibrated_c_T() must match.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fspde/fbm.hpp"
#include "fspde/grr.hpp"
#include "fspde/rng.hpp"
#include "fspde/time_grid.hpp"

using namespace fspde;
using nlohmann::json;

namespace {

struct Canonical {
    double alpha = 0.0, eps = 0.0, q = 0.0, beta = 0.0;
};

Canonical canonical_parameters(double H) {
    const auto hs = HurstSequence::validated({H}, 1.0);
    const auto window = constraint_audit(hs);
    Canonical c;
    c.alpha = 0.5 * (window.alpha_lo + window.alpha_hi);
    c.eps = constraint_audit(hs, c.alpha).eps_canonical;
    c.q = 2.0 / c.eps;
    c.beta = H - c.eps / 2.0;
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibrate the GRR continuity constant"};
    std::size_t n_paths = 1000, n_steps = 256;
    std::uint64_t seed = 777;
    double safety = 1.05;
    std::string out = "data/grr_calibration.json";
    app.add_option("--paths", n_paths, "fBm paths per Hurst value")->capture_default_str();
    app.add_option("--steps", n_steps, "grid steps per path")->capture_default_str();
    app.add_option("--seed", seed, "corpus seed")->capture_default_str();
    app.add_option("--safety", safety, "multiplier on the corpus maximum")
        ->capture_default_str();
    app.add_option("--out", out, "calibration record path")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    const TimeGrid grid(1.0, n_steps);
    const std::vector<double> sweep{0.55, 0.65, 0.75, 0.85, 0.95};

    json per_hurst = json::array();
    double corpus_max = 0.0;
    for (std::size_t hi = 0; hi < sweep.size(); ++hi) {
        const double H = sweep[hi];
        const auto par = canonical_parameters(H);
        const auto paths = sample_fbm_ensemble(H, grid, derive_subseed(seed, hi), n_paths);
        double h_max = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : h_max)
        for (std::int64_t p = 0; p < static_cast<std::int64_t>(paths.size()); ++p) {
            const auto res = grr_check(paths[static_cast<std::size_t>(p)].values, grid,
                                       par.q, par.beta, 1.0);
            h_max = std::max(h_max, res.max_ratio);
        }
        corpus_max = std::max(corpus_max, h_max);
        per_hurst.push_back({{"hurst", H},
                             {"alpha", par.alpha},
                             {"eps", par.eps},
                             {"q", par.q},
                             {"beta", par.beta},
                             {"paths", n_paths},
                             {"max_ratio_at_unit_cT", h_max}});
        std::cout << "H=" << H << "  q=" << par.q << "  beta=" << par.beta
                  << "  max ratio (c_T=1) = " << std::setprecision(10) << h_max << "\n";
    }

    // deterministic shapes, checked at every canonical parameter pair
    json shapes = json::array();
    const auto eval_shape = [&](const std::string& name, auto fn) {
        std::vector<double> values(grid.n_steps() + 1);
        for (std::size_t k = 0; k <= grid.n_steps(); ++k) values[k] = fn(grid.node(k));
        double worst = 0.0;
        for (double H : sweep) {
            const auto par = canonical_parameters(H);
            worst = std::max(worst,
                             grr_check(values, grid, par.q, par.beta, 1.0).max_ratio);
        }
        corpus_max = std::max(corpus_max, worst);
        shapes.push_back({{"shape", name}, {"max_ratio_at_unit_cT", worst}});
        std::cout << name << ": max ratio (c_T=1) = " << worst << "\n";
    };
    eval_shape("linear", [](double t) { return t; });
    eval_shape("quadratic", [](double t) { return t * t; });
    eval_shape("sinusoidal", [](double t) { return std::sin(6.283185307179586 * t); });

    const double c_T = safety * corpus_max;
    std::cout << "corpus max = " << std::setprecision(17) << corpus_max
              << "\nfrozen c_T = " << c_T << "\n";

    json record;
    record["corpus"] = {{"paths_per_hurst", n_paths},
                        {"n_steps", n_steps},
                        {"seed", seed},
                        {"horizon", 1.0},
                        {"sweep", sweep}};
    record["per_hurst"] = per_hurst;
    record["shapes"] = shapes;
    record["corpus_max_ratio"] = corpus_max;
    record["safety_factor"] = safety;
    record["c_T"] = c_T;
    record["regenerate"] = "./build/fspde_calibrate --paths 1000 --steps 256 --seed 777";

    std::ofstream f(out, std::ios::binary);
    if (!f) {
        std::cerr << "cannot write " << out << "\n";
        return 1;
    }
    f << record.dump(2) << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}
