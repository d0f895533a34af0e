#include "fspde/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fspde/rng.hpp"
#include "fspde/spectral.hpp"

namespace fspde {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw std::invalid_argument("config error at " + path + ": " + msg);
}

// strict object walk: the allowed keys are exactly the required keys
void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> keys) {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(path + "." + it.key(), "unknown key");
    }
    for (const char* k : keys)
        if (!j.contains(k)) fail(path, std::string("missing key \"") + k + "\"");
}

double get_num(const json& j, const std::string& path, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path + "." + key, "must be finite");
    return x;
}

std::uint64_t get_uint(const json& j, const std::string& path, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        fail(path + "." + key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path, const char* key) {
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key) {
    const json& v = j.at(key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

NonlinearitySpec::Kind parse_family(const std::string& name, const std::string& path) {
    if (name == "zero") return NonlinearitySpec::Kind::zero;
    if (name == "affine") return NonlinearitySpec::Kind::affine;
    if (name == "tanh") return NonlinearitySpec::Kind::tanh;
    if (name == "sine") return NonlinearitySpec::Kind::sine;
    fail(path, "unknown family \"" + name + "\" (zero | affine | tanh | sine)");
}

// one scalar-function block of the nonlinearity: keys depend on the family
void parse_scalar_fn(const json& j, const std::string& path, NonlinearitySpec::Kind& kind,
                     double& a, double& b) {
    if (!j.is_object() || !j.contains("family")) fail(path, "expected {\"family\": ...}");
    kind = parse_family(get_str(j, path, "family"), path + ".family");
    switch (kind) {
    case NonlinearitySpec::Kind::zero:
        check_keys(j, path, {"family"});
        a = b = 0.0;
        break;
    case NonlinearitySpec::Kind::affine:
        check_keys(j, path, {"family", "a", "b"});
        a = get_num(j, path, "a");
        b = get_num(j, path, "b");
        break;
    case NonlinearitySpec::Kind::tanh:
    case NonlinearitySpec::Kind::sine:
        check_keys(j, path, {"family", "a"});
        a = get_num(j, path, "a");
        b = 0.0;
        break;
    }
}

CoefficientField parse_coefficient(const json& j, const std::string& path, double horizon) {
    if (!j.is_object() || !j.contains("family")) fail(path, "expected {\"family\": ...}");
    const std::string family = get_str(j, path, "family");
    try {
        if (family == "identity") {
            check_keys(j, path, {"family"});
            return CoefficientField::identity();
        }
        if (family == "scaled") {
            check_keys(j, path, {"family", "k0"});
            return CoefficientField::scaled(get_num(j, path, "k0"));
        }
        if (family == "diag") {
            check_keys(j, path, {"family", "values"});
            const json& v = j.at("values");
            if (!v.is_array()) fail(path + ".values", "expected an array");
            std::vector<double> ks;
            for (const auto& e : v) {
                if (!e.is_number()) fail(path + ".values", "expected numbers");
                ks.push_back(e.get<double>());
            }
            return CoefficientField::diag(std::move(ks));
        }
        if (family == "variable") {
            check_keys(j, path, {"family", "k0", "amp_x", "freq_x", "amp_t"});
            return CoefficientField::variable(get_num(j, path, "k0"), get_num(j, path, "amp_x"),
                                              get_num(j, path, "freq_x"),
                                              get_num(j, path, "amp_t"), horizon);
        }
    } catch (const std::invalid_argument& e) {
        if (std::string(e.what()).rfind("config error", 0) == 0) throw;
        fail(path, e.what());
    }
    fail(path + ".family", "unknown family \"" + family +
                               "\" (identity | scaled | diag | variable)");
}

InitialSpec parse_initial(const json& j, const std::string& path) {
    if (!j.is_object() || !j.contains("family")) fail(path, "expected {\"family\": ...}");
    const std::string family = get_str(j, path, "family");
    InitialSpec s;
    if (family == "constant") {
        check_keys(j, path, {"family", "value"});
        s.family = InitialSpec::Family::constant;
        s.value = get_num(j, path, "value");
    } else if (family == "eigenmode") {
        check_keys(j, path, {"family", "mode", "value"});
        s.family = InitialSpec::Family::eigenmode;
        s.mode = static_cast<std::size_t>(get_uint(j, path, "mode"));
        s.value = get_num(j, path, "value");
    } else if (family == "bump") {
        check_keys(j, path, {"family", "value", "center", "width"});
        s.family = InitialSpec::Family::bump;
        s.value = get_num(j, path, "value");
        s.center = get_num(j, path, "center");
        s.width = get_num(j, path, "width");
        if (!(s.width > 0.0)) fail(path + ".width", "must be positive");
    } else if (family == "random") {
        check_keys(j, path, {"family", "sigma"});
        s.family = InitialSpec::Family::random;
        s.sigma = get_num(j, path, "sigma");
        if (!(s.sigma > 0.0)) fail(path + ".sigma", "must be positive");
    } else {
        fail(path + ".family",
             "unknown family \"" + family + "\" (constant | eigenmode | bump | random)");
    }
    return s;
}

const char* initial_name(InitialSpec::Family f) {
    switch (f) {
    case InitialSpec::Family::constant:
        return "constant";
    case InitialSpec::Family::eigenmode:
        return "eigenmode";
    case InitialSpec::Family::bump:
        return "bump";
    case InitialSpec::Family::random:
        return "random";
    }
    return "?";
}

const char* fn_name(NonlinearitySpec::Kind k) {
    switch (k) {
    case NonlinearitySpec::Kind::zero:
        return "zero";
    case NonlinearitySpec::Kind::affine:
        return "affine";
    case NonlinearitySpec::Kind::tanh:
        return "tanh";
    case NonlinearitySpec::Kind::sine:
        return "sine";
    }
    return "?";
}

json scalar_fn_json(NonlinearitySpec::Kind kind, double a, double b) {
    json j{{"family", fn_name(kind)}};
    switch (kind) {
    case NonlinearitySpec::Kind::zero:
        break;
    case NonlinearitySpec::Kind::affine:
        j["a"] = a;
        j["b"] = b;
        break;
    case NonlinearitySpec::Kind::tanh:
    case NonlinearitySpec::Kind::sine:
        j["a"] = a;
        break;
    }
    return j;
}

} // namespace

std::vector<double> materialize_initial(const InitialSpec& spec, const HornGrid& grid,
                                        const SpectralBasis* basis, std::uint64_t seed) {
    const std::size_t n = grid.n_cells();
    std::vector<double> u(n, 0.0);
    switch (spec.family) {
    case InitialSpec::Family::constant:
        for (auto& x : u) x = spec.value;
        break;
    case InitialSpec::Family::eigenmode: {
        if (basis == nullptr)
            throw std::invalid_argument("eigenmode initial state needs a spectral basis");
        if (basis->grid.get() != &grid)
            throw std::invalid_argument("initial-state basis lives on a different grid");
        if (spec.mode >= basis->n_modes())
            throw std::invalid_argument("eigenmode index exceeds the basis size");
        for (std::size_t c = 0; c < n; ++c)
            u[c] = spec.value * basis->modes(static_cast<Eigen::Index>(c),
                                             static_cast<Eigen::Index>(spec.mode));
        break;
    }
    case InitialSpec::Family::bump: {
        if (!(spec.width > 0.0)) throw std::invalid_argument("bump width must be positive");
        for (std::size_t c = 0; c < n; ++c) {
            const double z = (grid.axial(c) - spec.center) / spec.width;
            u[c] = spec.value * std::exp(-z * z);
        }
        break;
    }
    case InitialSpec::Family::random: {
        if (!(spec.sigma > 0.0)) throw std::invalid_argument("random sigma must be positive");
        const auto z = standard_normals(seed, n);
        for (std::size_t c = 0; c < n; ++c) u[c] = spec.sigma * z[c];
        break;
    }
    }
    return u;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    const std::string root = "$";
    check_keys(j, root,
               {"schema_version", "seed", "time", "domain", "noise", "alpha", "coefficient",
                "nonlinearity", "initial", "ensemble", "save_fields"});

    ExperimentConfig cfg;
    const auto version = get_uint(j, root, "schema_version");
    if (version != 1) fail(root + ".schema_version", "unsupported schema version");
    cfg.schema_version = 1;
    cfg.seed = get_uint(j, root, "seed");

    const json& jt = j.at("time");
    check_keys(jt, root + ".time", {"horizon", "n_steps"});
    cfg.horizon = get_num(jt, root + ".time", "horizon");
    if (!(cfg.horizon > 0.0)) fail(root + ".time.horizon", "must be positive");
    const auto n_steps = get_uint(jt, root + ".time", "n_steps");
    if (n_steps < 1 || n_steps > (1u << 20)) fail(root + ".time.n_steps", "out of range [1, 2^20]");
    cfg.n_steps = static_cast<std::size_t>(n_steps);

    const json& jd = j.at("domain");
    check_keys(jd, root + ".domain",
               {"family", "parameter", "dimension", "truncation", "resolution"});
    const std::string curve_family = get_str(jd, root + ".domain", "family");
    const double parameter = get_num(jd, root + ".domain", "parameter");
    try {
        if (curve_family == "stretched_exp")
            cfg.curve = BoundaryCurve::stretched_exp(parameter);
        else if (curve_family == "plain_exp")
            cfg.curve = BoundaryCurve::plain_exp(parameter);
        else
            fail(root + ".domain.family",
                 "unknown family \"" + curve_family + "\" (stretched_exp | plain_exp)");
    } catch (const std::invalid_argument& e) {
        if (std::string(e.what()).rfind("config error", 0) == 0) throw;
        fail(root + ".domain.parameter", e.what());
    }
    const auto dim = get_uint(jd, root + ".domain", "dimension");
    if (dim != 2 && dim != 3) fail(root + ".domain.dimension", "must be 2 or 3");
    cfg.dimension = static_cast<int>(dim);
    cfg.truncation = get_num(jd, root + ".domain", "truncation");
    if (!(cfg.truncation > 0.0)) fail(root + ".domain.truncation", "must be positive");
    cfg.resolution = get_num(jd, root + ".domain", "resolution");
    if (!(cfg.resolution > 0.0)) fail(root + ".domain.resolution", "must be positive");

    const json& jn = j.at("noise");
    check_keys(jn, root + ".noise", {"hurst", "n_modes", "decay_exponent"});
    const json& jh = jn.at("hurst");
    if (!jh.is_array() || jh.empty()) fail(root + ".noise.hurst", "expected a nonempty array");
    std::vector<double> hvals;
    for (std::size_t i = 0; i < jh.size(); ++i) {
        const json& e = jh[i];
        if (!e.is_number())
            fail(root + ".noise.hurst[" + std::to_string(i) + "]", "expected a number");
        const double H = e.get<double>();
        if (!(H > 0.5) || !(H < 1.0))
            fail(root + ".noise.hurst[" + std::to_string(i) + "]",
                 "must lie in the open interval (0.5, 1)");
        hvals.push_back(H);
    }
    const auto n_modes = get_uint(jn, root + ".noise", "n_modes");
    if (n_modes < 1 || n_modes > 4096) fail(root + ".noise.n_modes", "out of range [1, 4096]");
    cfg.n_modes = static_cast<std::size_t>(n_modes);
    cfg.decay_exponent = get_num(jn, root + ".noise", "decay_exponent");
    if (!(cfg.decay_exponent > 0.0)) fail(root + ".noise.decay_exponent", "must be positive");

    cfg.alpha = get_num(j, root, "alpha");
    if (!(cfg.alpha > 0.0) || !(cfg.alpha < 0.5))
        fail(root + ".alpha", "must lie in the open interval (0, 0.5)");

    const json& jnl = j.at("nonlinearity");
    check_keys(jnl, root + ".nonlinearity", {"g", "h", "gamma"});
    parse_scalar_fn(jnl.at("g"), root + ".nonlinearity.g", cfg.nl.g_kind, cfg.nl.g_a,
                    cfg.nl.g_b);
    parse_scalar_fn(jnl.at("h"), root + ".nonlinearity.h", cfg.nl.h_kind, cfg.nl.h_a,
                    cfg.nl.h_b);
    cfg.nl.gamma = get_num(jnl, root + ".nonlinearity", "gamma");
    if (!(cfg.nl.gamma > 0.0) || !(cfg.nl.gamma <= 1.0))
        fail(root + ".nonlinearity.gamma", "must lie in (0, 1]");

    // one Hurst value per mode: shorter lists are cycled, a documented rule
    std::vector<double> cycled(cfg.n_modes);
    for (std::size_t i = 0; i < cfg.n_modes; ++i) cycled[i] = hvals[i % hvals.size()];
    cfg.hurst = HurstSequence::validated(std::move(cycled), cfg.nl.gamma);

    cfg.coeff_spec = j.at("coefficient");
    cfg.coeff = parse_coefficient(cfg.coeff_spec, root + ".coefficient", cfg.horizon);
    cfg.initial = parse_initial(j.at("initial"), root + ".initial");

    const auto ensemble = get_uint(j, root, "ensemble");
    if (ensemble < 1 || ensemble > 65536) fail(root + ".ensemble", "out of range [1, 65536]");
    cfg.ensemble = static_cast<std::size_t>(ensemble);
    cfg.save_fields = get_bool(j, root, "save_fields");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["seed"] = seed;
    j["time"] = {{"horizon", horizon}, {"n_steps", n_steps}};
    j["domain"] = {{"family", curve.family() == BoundaryCurve::Family::stretched_exp
                                  ? "stretched_exp"
                                  : "plain_exp"},
                   {"parameter", curve.parameter()},
                   {"dimension", dimension},
                   {"truncation", truncation},
                   {"resolution", resolution}};
    j["noise"] = {{"hurst", hurst.values},
                  {"n_modes", n_modes},
                  {"decay_exponent", decay_exponent}};
    j["alpha"] = alpha;
    j["coefficient"] = coeff_spec;
    j["nonlinearity"] = {{"g", scalar_fn_json(nl.g_kind, nl.g_a, nl.g_b)},
                         {"h", scalar_fn_json(nl.h_kind, nl.h_a, nl.h_b)},
                         {"gamma", nl.gamma}};
    json ji{{"family", initial_name(initial.family)}};
    switch (initial.family) {
    case InitialSpec::Family::constant:
        ji["value"] = initial.value;
        break;
    case InitialSpec::Family::eigenmode:
        ji["mode"] = initial.mode;
        ji["value"] = initial.value;
        break;
    case InitialSpec::Family::bump:
        ji["value"] = initial.value;
        ji["center"] = initial.center;
        ji["width"] = initial.width;
        break;
    case InitialSpec::Family::random:
        ji["sigma"] = initial.sigma;
        break;
    }
    j["initial"] = ji;
    j["ensemble"] = ensemble;
    j["save_fields"] = save_fields;
    return j;
}

std::string fingerprint_of(const nlohmann::json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string ExperimentConfig::fingerprint() const { return fingerprint_of(to_json()); }

} // namespace fspde
