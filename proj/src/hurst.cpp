#include "fspde/hurst.hpp"

#include <algorithm>
#include <stdexcept>

namespace fspde {

double HurstSequence::h_min() const {
    return *std::min_element(values.begin(), values.end());
}

HurstSequence HurstSequence::validated(std::vector<double> values, double gamma) {
    if (values.empty())
        throw std::invalid_argument("HurstSequence: empty value list");
    for (double h : values)
        if (!(h > 0.5) || !(h < 1.0))
            throw std::invalid_argument("HurstSequence: every H must lie in (1/2, 1)");
    if (!(gamma > 0.0) || !(gamma <= 1.0))
        throw std::invalid_argument("HurstSequence: gamma must lie in (0, 1]");
    HurstSequence hs;
    hs.values = std::move(values);
    hs.gamma = gamma;
    return hs;
}

} // namespace fspde
