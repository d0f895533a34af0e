#pragma once

#include <cstddef>
#include <vector>

namespace fspde {

/// Mode-wise Hurst parameters of the driving noise, all in (1/2, 1), together
/// with the smoothness offset gamma in (0, 1] of the noise coefficient.
/// h_min() is the infimum the pathwise estimates are uniform over.
struct HurstSequence {
    std::vector<double> values;
    double gamma = 1.0;

    double h_min() const;

    /// Validates ranges and returns the sequence; throws std::invalid_argument
    /// on an empty list, any H outside (1/2, 1), or gamma outside (0, 1].
    static HurstSequence validated(std::vector<double> values, double gamma);
};

} // namespace fspde
