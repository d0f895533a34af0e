#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fspde/config.hpp"
#include "fspde/horn.hpp"
#include "fspde/io.hpp"
#include "fspde/run.hpp"
#include "fspde/spectral.hpp"

using namespace fspde;
using nlohmann::json;

namespace {

// scratch directory removed on scope exit
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("fspde_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

json base_config() {
    return json{
        {"schema_version", 1},
        {"seed", 42},
        {"time", {{"horizon", 1.0}, {"n_steps", 16}}},
        {"domain",
         {{"family", "stretched_exp"},
          {"parameter", 1.0},
          {"dimension", 2},
          {"truncation", 4.0},
          {"resolution", 0.0625}}},
        {"noise", {{"hurst", {0.8}}, {"n_modes", 12}, {"decay_exponent", 4.0}}},
        {"alpha", 0.3},
        {"coefficient", {{"family", "identity"}}},
        {"nonlinearity",
         {{"g", {{"family", "tanh"}, {"a", 1.0}}},
          {"h", {{"family", "affine"}, {"a", 0.5}, {"b", 1.0}}},
          {"gamma", 1.0}}},
        {"initial", {{"family", "constant"}, {"value", 1.0}}},
        {"ensemble", 2},
        {"save_fields", false}};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(static_cast<bool>(in));
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

} // namespace

TEST_CASE("config round trip is idempotent and fingerprints are stable") {
    const auto cfg = ExperimentConfig::from_json(base_config());
    const auto echo = cfg.to_json();
    const auto cfg2 = ExperimentConfig::from_json(echo);
    CHECK(cfg2.to_json() == echo);
    CHECK(cfg2.fingerprint() == cfg.fingerprint());

    const auto fp = cfg.fingerprint();
    CHECK(fp.size() == 16);
    for (char c : fp) CHECK(std::isxdigit(static_cast<unsigned char>(c)));

    // key order in the source file does not matter: objects are canonicalized
    json reordered;
    const auto base = base_config();
    std::vector<std::string> keys;
    for (auto it = base.begin(); it != base.end(); ++it) keys.push_back(it.key());
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) reordered[*it] = base.at(*it);
    CHECK(ExperimentConfig::from_json(reordered).fingerprint() == fp);

    // the seed is part of the identity
    auto other = base;
    other["seed"] = 43;
    CHECK(ExperimentConfig::from_json(other).fingerprint() != fp);

    // hurst lists shorter than n_modes are cycled
    auto cycled = base;
    cycled["noise"]["hurst"] = {0.6, 0.9};
    const auto ccfg = ExperimentConfig::from_json(cycled);
    REQUIRE(ccfg.hurst.values.size() == 12);
    CHECK(ccfg.hurst.values[0] == 0.6);
    CHECK(ccfg.hurst.values[1] == 0.9);
    CHECK(ccfg.hurst.values[2] == 0.6);
    CHECK(ccfg.hurst.h_min() == 0.6);
}

TEST_CASE("config rejections carry the JSON path of the offending entry") {
    const auto expect_error = [](json j, const std::string& needle) {
        try {
            ExperimentConfig::from_json(j);
            FAIL_CHECK("expected a config error mentioning " << needle);
        } catch (const std::invalid_argument& e) {
            const std::string what = e.what();
            INFO(what);
            CHECK(what.find("config error at ") == 0);
            CHECK(what.find(needle) != std::string::npos);
        }
    };

    auto j = base_config();
    j["surprise"] = 1;
    expect_error(j, "$.surprise");

    j = base_config();
    j.erase("alpha");
    expect_error(j, "alpha");

    j = base_config();
    j["domain"]["resolution"] = -1.0;
    expect_error(j, "$.domain.resolution");

    j = base_config();
    j["domain"]["dimension"] = 4;
    expect_error(j, "$.domain.dimension");

    j = base_config();
    j["noise"]["hurst"] = {0.4};
    expect_error(j, "$.noise.hurst[0]");

    j = base_config();
    j["noise"]["n_modes"] = 0;
    expect_error(j, "$.noise.n_modes");

    j = base_config();
    j["alpha"] = 0.6;
    expect_error(j, "$.alpha");

    j = base_config();
    j["coefficient"] = {{"family", "mystery"}};
    expect_error(j, "$.coefficient.family");

    j = base_config();
    j["coefficient"] = {{"family", "variable"},
                        {"k0", 1.0},
                        {"amp_x", 0.7},
                        {"freq_x", 1.0},
                        {"amp_t", 0.7}};
    expect_error(j, "$.coefficient"); // |amp_x| + |amp_t| >= 1

    j = base_config();
    j["nonlinearity"]["gamma"] = 0.0;
    expect_error(j, "$.nonlinearity.gamma");

    j = base_config();
    j["nonlinearity"]["g"] = {{"family", "tanh"}}; // missing "a"
    expect_error(j, "$.nonlinearity.g");

    j = base_config();
    j["initial"] = {{"family", "bump"}, {"value", 1.0}, {"center", 0.5}, {"width", 0.0}};
    expect_error(j, "$.initial.width");

    j = base_config();
    j["time"]["n_steps"] = -4;
    expect_error(j, "$.time.n_steps");

    j = base_config();
    j["schema_version"] = 2;
    expect_error(j, "$.schema_version");

    CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.json"),
                    std::invalid_argument);
}

TEST_CASE("initial states materialize per family and validate their inputs") {
    const auto grid = std::make_shared<const HornGrid>(
        build_grid(BoundaryCurve::stretched_exp(1.0), 2, 4.0, 0.125));
    const auto basis = build_basis(grid, 4, 4.0);

    InitialSpec s;
    s.family = InitialSpec::Family::constant;
    s.value = 2.5;
    auto u = materialize_initial(s, *grid, nullptr, 1);
    REQUIRE(u.size() == grid->n_cells());
    for (double x : u) CHECK(x == 2.5);

    s.family = InitialSpec::Family::eigenmode;
    s.mode = 1;
    s.value = 3.0;
    u = materialize_initial(s, *grid, &basis, 1);
    for (std::size_t c = 0; c < u.size(); ++c)
        CHECK(u[c] == 3.0 * basis.modes(static_cast<Eigen::Index>(c), 1));
    CHECK_THROWS_AS(materialize_initial(s, *grid, nullptr, 1), std::invalid_argument);
    s.mode = 99;
    CHECK_THROWS_AS(materialize_initial(s, *grid, &basis, 1), std::invalid_argument);

    s = InitialSpec{};
    s.family = InitialSpec::Family::bump;
    s.value = 1.0;
    s.center = 1.0;
    s.width = 0.5;
    u = materialize_initial(s, *grid, nullptr, 1);
    double peak = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) {
        CHECK(u[c] > 0.0);
        CHECK(u[c] <= 1.0);
        peak = std::max(peak, u[c]);
    }
    CHECK(peak > 0.9); // some cell sits near the bump centre

    s.family = InitialSpec::Family::random;
    s.sigma = 0.1;
    const auto r1 = materialize_initial(s, *grid, nullptr, 7);
    const auto r2 = materialize_initial(s, *grid, nullptr, 7);
    const auto r3 = materialize_initial(s, *grid, nullptr, 8);
    CHECK(r1 == r2);
    CHECK(r1 != r3);
}

TEST_CASE("binary column container round-trips exactly and rejects malformed input") {
    TempDir tmp("bin");
    const std::string path = tmp.sub("cols.bin");
    const std::vector<std::string> names{"t", "value"};
    const std::vector<std::vector<double>> cols{{0.0, 0.5, 1.0},
                                                {1.0, -2.25, 3.141592653589793}};
    write_binary_columns(path, names, cols);
    const auto back = read_binary_columns(path);
    CHECK(back.names == names);
    CHECK(back.columns == cols); // bitwise: doubles pass through untouched

    CHECK_THROWS_AS(write_binary_columns(tmp.sub("bad.bin"), {"a"}, {{1.0}, {2.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(write_binary_columns(tmp.sub("bad.bin"), {"a", "b"}, {{1.0}, {2.0, 3.0}}),
                    std::invalid_argument);

    {
        std::ofstream f(tmp.sub("magic.bin"), std::ios::binary);
        f << "NOTMAGIC" << std::string(16, '\0');
    }
    CHECK_THROWS_AS(read_binary_columns(tmp.sub("magic.bin")), std::runtime_error);

    const auto full = slurp(path);
    {
        std::ofstream f(tmp.sub("short.bin"), std::ios::binary);
        f << full.substr(0, full.size() - 7);
    }
    CHECK_THROWS_AS(read_binary_columns(tmp.sub("short.bin")), std::runtime_error);
    {
        std::ofstream f(tmp.sub("long.bin"), std::ios::binary);
        f << full << "extra";
    }
    CHECK_THROWS_AS(read_binary_columns(tmp.sub("long.bin")), std::runtime_error);
    CHECK_THROWS_AS(read_binary_columns(tmp.sub("absent.bin")), std::runtime_error);
}

TEST_CASE("CSV writers stamp the fingerprint and survive a read back at full precision") {
    TempDir tmp("csv");
    const std::string path = tmp.sub("traj.csv");
    const std::vector<double> t{0.0, 0.5, 1.0};
    const std::vector<double> l2{1.0, 0.123456789012345678, 3.0};
    const std::vector<double> h1{0.0, 1e-300, 2.0};
    write_trajectory_csv(path, t, l2, h1, "deadbeefdeadbeef");
    const auto text = slurp(path);
    CHECK(text.find("# ") == 0);
    CHECK(text.find("fingerprint=deadbeefdeadbeef") != std::string::npos);
    CHECK(text.find("t,l2,h1semi") != std::string::npos);

    // 17 significant digits reproduce the doubles exactly
    const auto pos = text.find("0.5,");
    REQUIRE(pos != std::string::npos);
    std::istringstream row(text.substr(pos));
    double tv, lv, hv;
    char comma;
    row >> tv >> comma >> lv >> comma >> hv;
    CHECK(tv == 0.5);
    CHECK(lv == 0.123456789012345678);
    CHECK(hv == 1e-300);

    CHECK_THROWS_AS(write_trajectory_csv(tmp.sub("bad.csv"), t, {1.0}, h1, "fp"),
                    std::invalid_argument);
}

TEST_CASE("manifest comparison ignores the wall clock and nothing else") {
    TempDir tmp("man");
    RunManifest a;
    a.command = "simulate";
    a.fingerprint = "0123456789abcdef";
    a.seed = 42;
    a.checks["ok"] = true;
    a.metrics["value"] = 1.5;
    a.artifacts = {"x.csv"};
    a.wall_clock_seconds = 1.0;
    RunManifest b = a;
    b.wall_clock_seconds = 2.0;
    a.write(tmp.sub("a.json"));
    b.write(tmp.sub("b.json"));
    CHECK(files_match_excluding_wall_clock(tmp.sub("a.json"), tmp.sub("b.json")));

    b.metrics["value"] = 1.6;
    b.write(tmp.sub("c.json"));
    CHECK(!files_match_excluding_wall_clock(tmp.sub("a.json"), tmp.sub("c.json")));
    CHECK(!files_match_excluding_wall_clock(tmp.sub("a.json"), tmp.sub("missing.json")));

    const auto text = slurp(tmp.sub("a.json"));
    const auto parsed = json::parse(text);
    CHECK(parsed["tool_version"] == "fspde 1.0.0");
    CHECK(parsed["fingerprint"] == "0123456789abcdef");
    CHECK(parsed["checks"]["ok"] == true);
}

TEST_CASE("simulate writes one trajectory per member and reruns byte-identically") {
    TempDir tmp("sim");
    auto j = base_config();
    j["ensemble"] = 3;
    j["save_fields"] = true;
    const auto cfg = ExperimentConfig::from_json(j);

    RunOptions opt;
    opt.out_dir = tmp.sub("run1");
    CHECK(cmd_simulate(cfg, opt) == 0);
    for (const char* name : {"trajectory_000.csv", "trajectory_001.csv",
                             "trajectory_002.csv", "fields_000.bin", "manifest.json",
                             "config.json"})
        CHECK(std::filesystem::exists(std::filesystem::path(opt.out_dir) / name));

    RunOptions opt2;
    opt2.out_dir = tmp.sub("run2");
    CHECK(cmd_simulate(cfg, opt2) == 0);
    for (const char* name : {"trajectory_000.csv", "trajectory_002.csv", "config.json"})
        CHECK(slurp(tmp.sub("run1") + "/" + name) == slurp(tmp.sub("run2") + "/" + name));
    CHECK(slurp(tmp.sub("run1") + "/fields_001.bin") ==
          slurp(tmp.sub("run2") + "/fields_001.bin"));
    CHECK(files_match_excluding_wall_clock(tmp.sub("run1") + "/manifest.json",
                                           tmp.sub("run2") + "/manifest.json"));

    // a different seed changes the numbers but not the shape
    RunOptions opt3;
    opt3.out_dir = tmp.sub("run3");
    opt3.seed_override = 4242;
    CHECK(cmd_simulate(cfg, opt3) == 0);
    CHECK(slurp(tmp.sub("run1") + "/trajectory_000.csv") !=
          slurp(tmp.sub("run3") + "/trajectory_000.csv"));

    // members differ from one another
    CHECK(slurp(tmp.sub("run1") + "/trajectory_000.csv") !=
          slurp(tmp.sub("run1") + "/trajectory_001.csv"));

    const auto man = json::parse(slurp(tmp.sub("run1") + "/manifest.json"));
    CHECK(man["checks"]["constraint_audit"] == true);
    CHECK(man["checks"]["spectral_gate"] == true);
    CHECK(man["checks"]["norms_finite"] == true);
    CHECK(man["fingerprint"] == cfg.fingerprint());
}

TEST_CASE("an inadmissible alpha window aborts before any output exists") {
    TempDir tmp("gate");
    auto j = base_config();
    j["alpha"] = 0.1; // window for H = 0.8, gamma = 1 is (0.2, 0.5)
    const auto cfg = ExperimentConfig::from_json(j);
    RunOptions opt;
    opt.out_dir = tmp.sub("never");
    CHECK(cmd_simulate(cfg, opt) == 2);
    CHECK(!std::filesystem::exists(opt.out_dir));
    CHECK(cmd_verify(cfg, "noise", opt) == 2);
    CHECK(!std::filesystem::exists(opt.out_dir));
    CHECK(cmd_convergence(cfg, 2, opt) == 2);
    CHECK(!std::filesystem::exists(opt.out_dir));
}

TEST_CASE("verify rejects unknown suites and reports the noise suite") {
    TempDir tmp("verify");
    const auto cfg = ExperimentConfig::from_json(base_config());
    RunOptions opt;
    opt.out_dir = tmp.sub("v");
    CHECK_THROWS_AS(cmd_verify(cfg, "nonsense", opt), std::invalid_argument);
    CHECK(!std::filesystem::exists(opt.out_dir));

    CHECK(cmd_verify(cfg, "noise", opt) == 0);
    const auto rep = json::parse(slurp(tmp.sub("v") + "/verify_noise.json"));
    CHECK(rep["suite"] == "noise");
    CHECK(rep["fingerprint"] == cfg.fingerprint());
    CHECK(rep["checks"]["noise_covariance_cholesky"] == true);
    CHECK(rep["checks"]["noise_gate_convergent"] == true);
    CHECK(rep["checks"]["noise_gate_divergent"] == true);
    CHECK(rep["tables"].contains("covariance"));
}

TEST_CASE("fbm-sample writes paths deterministically and validates its arguments") {
    TempDir tmp("fbm");
    RunOptions opt;
    opt.out_dir = tmp.sub("a");
    CHECK(cmd_fbm_sample(0.7, 1.0, 64, 5, 2, true, opt) == 0);
    RunOptions opt2;
    opt2.out_dir = tmp.sub("b");
    CHECK(cmd_fbm_sample(0.7, 1.0, 64, 5, 2, true, opt2) == 0);
    CHECK(slurp(tmp.sub("a") + "/fbm_000.csv") == slurp(tmp.sub("b") + "/fbm_000.csv"));
    CHECK(slurp(tmp.sub("a") + "/fbm_paths.bin") == slurp(tmp.sub("b") + "/fbm_paths.bin"));

    const auto cols = read_binary_columns(tmp.sub("a") + "/fbm_paths.bin");
    REQUIRE(cols.names.size() == 4); // t, two paths, fingerprint sentinel
    CHECK(cols.names[0] == "t");
    CHECK(cols.names[3].rfind("fingerprint_", 0) == 0);
    CHECK(cols.columns[1][0] == 0.0); // paths start at zero

    // the seed override takes precedence over the positional seed
    RunOptions opt3;
    opt3.out_dir = tmp.sub("c");
    opt3.seed_override = 5;
    CHECK(cmd_fbm_sample(0.7, 1.0, 64, 999, 2, false, opt3) == 0);
    CHECK(slurp(tmp.sub("a") + "/fbm_000.csv") == slurp(tmp.sub("c") + "/fbm_000.csv"));

    CHECK_THROWS_AS(cmd_fbm_sample(1.2, 1.0, 64, 5, 1, false, opt), std::invalid_argument);
    CHECK_THROWS_AS(cmd_fbm_sample(0.7, -1.0, 64, 5, 1, false, opt), std::invalid_argument);
    CHECK_THROWS_AS(cmd_fbm_sample(0.7, 1.0, 64, 5, 0, false, opt), std::invalid_argument);
    CHECK_THROWS_AS(cmd_fbm_sample(0.7, 1.0, 64, 5, 5000, false, opt),
                    std::invalid_argument);
}

TEST_CASE("domain-check passes the squeezing curve and rejects the plain exponential") {
    TempDir tmp("dom");
    const auto good = ExperimentConfig::from_json(base_config());
    RunOptions opt;
    opt.out_dir = tmp.sub("good");
    CHECK(cmd_domain_check(good, opt) == 0);
    const auto rep = json::parse(slurp(tmp.sub("good") + "/domain_check.json"));
    CHECK(rep["admissible"] == true);
    CHECK(rep["checks"]["measure_closure"] == true);
    CHECK(rep["truncation_table"].size() == 4);

    auto j = base_config();
    j["domain"]["family"] = "plain_exp";
    const auto bad = ExperimentConfig::from_json(j);
    RunOptions opt2;
    opt2.out_dir = tmp.sub("bad");
    CHECK(cmd_domain_check(bad, opt2) == 1);
    const auto rep2 = json::parse(slurp(tmp.sub("bad") + "/domain_check.json"));
    CHECK(rep2["admissible"] == false);
}

TEST_CASE("convergence accepts two levels, insists on two, and refuses absurd depths") {
    TempDir tmp("conv");
    auto j = base_config();
    j["domain"]["resolution"] = 0.25; // coarse base keeps two levels cheap
    j["noise"]["n_modes"] = 6;
    j["time"]["n_steps"] = 8;
    j["nonlinearity"]["h"] = {{"family", "zero"}};
    const auto cfg = ExperimentConfig::from_json(j);

    RunOptions opt;
    opt.out_dir = tmp.sub("two");
    CHECK(cmd_convergence(cfg, 2, opt) == 0);
    CHECK(std::filesystem::exists(tmp.sub("two") + "/convergence.csv"));
    const auto man = json::parse(slurp(tmp.sub("two") + "/manifest.json"));
    CHECK(man["metrics"].contains("error_l0"));
    CHECK(man["metrics"]["error_l0"].get<double>() > 0.0);

    CHECK_THROWS_AS(cmd_convergence(cfg, 1, opt), std::invalid_argument);
    try {
        cmd_convergence(cfg, 14, opt);
        FAIL_CHECK("expected a refusal for 14 levels");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        INFO(what);
        CHECK(what.find("refusing") != std::string::npos);
    }

    auto jr = base_config();
    jr["initial"] = {{"family", "random"}, {"sigma", 1.0}};
    const auto rcfg = ExperimentConfig::from_json(jr);
    CHECK_THROWS_AS(cmd_convergence(rcfg, 2, opt), std::invalid_argument);
}
