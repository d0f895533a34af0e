#include "fspde/time_grid.hpp"

#include <cmath>
#include <stdexcept>

namespace fspde {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
    if (n_steps == 0)
        throw std::invalid_argument("TimeGrid: need at least one step");
    dt_ = horizon / static_cast<double>(n_steps);
    nodes_.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k)
        nodes_[k] = dt_ * static_cast<double>(k);
    nodes_.back() = horizon; // exact endpoint regardless of rounding
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
    if (factor == 0)
        throw std::invalid_argument("TimeGrid::refined: factor must be positive");
    return TimeGrid(horizon_, n_steps_ * factor);
}

std::size_t TimeGrid::index_of(double t) const {
    double raw = t / dt_;
    auto k = static_cast<std::size_t>(std::llround(raw));
    if (k > n_steps_ || std::abs(raw - static_cast<double>(k)) > 1e-9)
        throw std::invalid_argument("TimeGrid::index_of: t is not a grid node");
    return k;
}

bool TimeGrid::operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
}

} // namespace fspde
