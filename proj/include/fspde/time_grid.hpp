#pragma once

#include <cstddef>
#include <vector>

namespace fspde {

/// Uniform partition of [0, horizon]. Node k sits at k*dt; nodes() has
/// n_steps+1 entries and nodes().back() == horizon exactly.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps);

    double horizon() const { return horizon_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double node(std::size_t k) const { return nodes_[k]; }
    const std::vector<double>& nodes() const { return nodes_; }

    /// Same horizon, every interval split into `factor` equal parts.
    TimeGrid refined(std::size_t factor) const;

    /// Node index of time t; throws if t is not a grid node (1e-9*dt slack).
    std::size_t index_of(double t) const;

    bool operator==(const TimeGrid& other) const;

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
    std::vector<double> nodes_;
};

} // namespace fspde
