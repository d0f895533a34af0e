#include "fspde/io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fspde {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: no platform newline games
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    return out;
}

constexpr char kMagic[8] = {'F', 'S', 'P', 'D', 'E', 'B', '0', '1'};

template <typename T> void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T> T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error(path + ": truncated binary column file");
    return v;
}

} // namespace

void write_path_csv(const std::string& path, const FbmPath& p,
                    const std::string& fingerprint) {
    auto out = open_out(path);
    out << "# fbm path: hurst=" << p.hurst << " n_steps=" << p.grid.n_steps()
        << " horizon=" << p.grid.horizon() << "\n";
    out << "# seed=" << p.seed << " fingerprint=" << fingerprint << "\n";
    out << "t,value\n";
    for (std::size_t k = 0; k <= p.grid.n_steps(); ++k)
        out << p.grid.node(k) << "," << p.values[k] << "\n";
}

void write_basis_csv(const std::string& path, const SpectralBasis& basis,
                     const std::string& fingerprint) {
    auto out = open_out(path);
    out << "# spectral basis: n_modes=" << basis.n_modes()
        << " decay_exponent=" << basis.decay_exponent << "\n";
    out << "# fingerprint=" << fingerprint << "\n";
    out << "i,lambda,sup_norm\n";
    for (std::size_t i = 0; i < basis.n_modes(); ++i)
        out << i << "," << basis.lambda[i] << "," << basis.sup_norm[i] << "\n";
}

void write_grid_csv(const std::string& path, const HornGrid& grid,
                    const std::string& fingerprint) {
    auto out = open_out(path);
    out << "# horn grid: dimension=" << grid.dimension << " cells=" << grid.n_cells()
        << " measure_total=" << grid.measure_total << " tail=" << grid.tail_measure << "\n";
    out << "# fingerprint=" << fingerprint << "\n";
    out << "cell,x0,x1,x2,measure,boundary\n";
    for (std::size_t c = 0; c < grid.n_cells(); ++c) {
        const auto& x = grid.centers[c];
        out << c << "," << x[0] << "," << x[1] << "," << x[2] << "," << grid.measure[c]
            << "," << (grid.boundary[c] ? 1 : 0) << "\n";
    }
}

void write_trajectory_csv(const std::string& path, const std::vector<double>& t,
                          const std::vector<double>& l2, const std::vector<double>& h1,
                          const std::string& fingerprint) {
    if (t.size() != l2.size() || t.size() != h1.size())
        throw std::invalid_argument("trajectory columns must share one length");
    auto out = open_out(path);
    out << "# trajectory norms: n_nodes=" << t.size() << "\n";
    out << "# fingerprint=" << fingerprint << "\n";
    out << "t,l2,h1semi\n";
    for (std::size_t k = 0; k < t.size(); ++k)
        out << t[k] << "," << l2[k] << "," << h1[k] << "\n";
}

void write_binary_columns(const std::string& path, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size())
        throw std::invalid_argument("binary columns: one name per column required");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != rows)
            throw std::invalid_argument("binary columns: ragged columns not representable");
    for (const auto& n : names)
        if (n.size() > 65535)
            throw std::invalid_argument("binary columns: name longer than 65535 bytes");

    auto out = open_out(path);
    out.write(kMagic, sizeof kMagic);
    put(out, static_cast<std::uint32_t>(columns.size()));
    put(out, static_cast<std::uint64_t>(rows));
    for (const auto& n : names) {
        put(out, static_cast<std::uint16_t>(n.size()));
        out.write(n.data(), static_cast<std::streamsize>(n.size()));
    }
    for (const auto& c : columns)
        out.write(reinterpret_cast<const char*>(c.data()),
                  static_cast<std::streamsize>(c.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write on " + path);
}

BinaryColumns read_binary_columns(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error(path + ": not a binary column file (bad magic)");
    const auto ncols = take<std::uint32_t>(in, path);
    const auto nrows = take<std::uint64_t>(in, path);
    BinaryColumns bc;
    bc.names.reserve(ncols);
    for (std::uint32_t i = 0; i < ncols; ++i) {
        const auto len = take<std::uint16_t>(in, path);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw std::runtime_error(path + ": truncated binary column file");
        bc.names.push_back(std::move(name));
    }
    bc.columns.assign(ncols, std::vector<double>(nrows));
    for (auto& c : bc.columns) {
        in.read(reinterpret_cast<char*>(c.data()),
                static_cast<std::streamsize>(nrows * sizeof(double)));
        if (!in) throw std::runtime_error(path + ": truncated binary column file");
    }
    in.peek();
    if (!in.eof()) throw std::runtime_error(path + ": trailing bytes after column data");
    return bc;
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["fingerprint"] = fingerprint;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["checks"] = checks;
    j["metrics"] = metrics;
    j["artifacts"] = artifacts;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

bool files_match_excluding_wall_clock(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    const auto keep = [](const std::string& line) {
        return line.rfind("  \"wall_clock_seconds\"", 0) != 0;
    };
    std::string la, lb;
    for (;;) {
        bool ga = false, gb = false;
        while ((ga = static_cast<bool>(std::getline(fa, la))) && !keep(la)) {}
        while ((gb = static_cast<bool>(std::getline(fb, lb))) && !keep(lb)) {}
        if (!ga || !gb) return ga == gb;
        if (la != lb) return false;
    }
}

} // namespace fspde
