#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fspde/config.hpp"
#include "fspde/fbm.hpp"
#include "fspde/horn.hpp"
#include "fspde/spectral.hpp"

namespace fspde {

/// CSV with '#'-prefixed header lines carrying seed, parameters and the
/// config fingerprint, then "t,value" rows at full double precision.
void write_path_csv(const std::string& path, const FbmPath& p,
                    const std::string& fingerprint);

/// "i,lambda,sup_norm" rows for a spectral basis.
void write_basis_csv(const std::string& path, const SpectralBasis& basis,
                     const std::string& fingerprint);

/// Cell table: "cell,x0,x1,x2,measure,boundary".
void write_grid_csv(const std::string& path, const HornGrid& grid,
                    const std::string& fingerprint);

/// Per-time-node norms of a trajectory: "t,l2,h1semi".
void write_trajectory_csv(const std::string& path, const std::vector<double>& t,
                          const std::vector<double>& l2, const std::vector<double>& h1,
                          const std::string& fingerprint);

/// Binary column container (documented in the README):
///   8 bytes magic "FSPDEB01", u32 column count, u64 row count,
///   per column a u16 name length plus name bytes,
///   then column-major float64 data.
void write_binary_columns(const std::string& path,
                          const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& columns);

struct BinaryColumns {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
};
BinaryColumns read_binary_columns(const std::string& path);

/// Run manifest: fingerprint, seed, command, check verdicts, artifact list.
/// wall_clock_seconds is the only field excluded from byte-for-byte
/// comparisons between reruns.
struct RunManifest {
    std::string command;
    std::string fingerprint;
    std::string tool_version = "fspde 1.0.0";
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0.0;
    std::map<std::string, bool> checks;
    std::map<std::string, double> metrics;
    std::vector<std::string> artifacts;

    void write(const std::string& path) const;
};

/// Byte comparison of two files ignoring lines that begin with
/// "  \"wall_clock_seconds\"".
bool files_match_excluding_wall_clock(const std::string& a, const std::string& b);

} // namespace fspde
