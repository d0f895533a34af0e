#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fspde/horn.hpp"
#include "fspde/hurst.hpp"
#include "fspde/solver.hpp"
#include "fspde/time_grid.hpp"

// vendor json.hpp defines nlohmann::json; the fwd header does not ship with
// the single include, so declare the alias the implementation specializes.
#include <nlohmann/json.hpp>

namespace fspde {

struct InitialSpec {
    enum class Family { constant, eigenmode, bump, random };
    Family family = Family::constant;
    double value = 0.0;      // constant level or amplitude
    std::size_t mode = 1;    // eigenmode index (0 = flat mode)
    double center = 0.5;     // bump centre along the axial coordinate
    double width = 0.25;     // bump width
    double sigma = 1.0;      // random family: iid normal scale
};

std::vector<double> materialize_initial(const InitialSpec& spec, const HornGrid& grid,
                                        const SpectralBasis* basis, std::uint64_t seed);

/// One experiment, one file. Strict parsing: unknown keys, missing keys and
/// out-of-range values are structured errors carrying the JSON path.
struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t seed = 0;

    /// Parsed coefficient block kept verbatim: CoefficientField does not
    /// expose its parameters, so canonical re-serialization replays this.
    nlohmann::json coeff_spec = nlohmann::json{{"family", "identity"}};

    double horizon = 1.0;
    std::size_t n_steps = 64;

    int dimension = 2;
    BoundaryCurve curve = BoundaryCurve::stretched_exp(1.0);
    double truncation = 4.0;
    double resolution = 0.25;

    HurstSequence hurst;
    double alpha = 0.0; // time-regularity exponent used by checks

    std::size_t n_modes = 4;
    double decay_exponent = 4.0;

    CoefficientField coeff = CoefficientField::identity();
    NonlinearitySpec nl;
    InitialSpec initial;

    std::size_t ensemble = 1;
    bool save_fields = false;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;

    /// FNV-1a 64 over the canonical (sorted-key) serialization; hex string.
    std::string fingerprint() const;
};

/// FNV-1a 64 of a JSON value's canonical dump, as a 16-digit hex string.
/// Commands without a full config (fbm-sample) fingerprint their parameters.
std::string fingerprint_of(const nlohmann::json& j);

} // namespace fspde
