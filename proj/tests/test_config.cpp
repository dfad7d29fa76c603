#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <string>

#include "qdd/config.hpp"
#include "qdd/error.hpp"
#include "support.hpp"

using namespace qdd;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_config_text(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("minimal config takes every default") {
    const RunConfig cfg = parse_config_text("[problem]\ntype = separable\n");
    CHECK(cfg == RunConfig{});
    CHECK(cfg.method.method == Method::me_gide);
    CHECK(cfg.method.alpha == 0.4);
    CHECK(cfg.tessellation.cells == 256);
    CHECK(cfg.tessellation.effective_samples() == 50 * 256);
    CHECK(cfg.budget.batch_size == 64);
    CHECK(parse_config_text("") == RunConfig{});
}

TEST_CASE("comments, quoting and whitespace") {
    const RunConfig cfg = parse_config_text(
        "# header\n[method]  ; trailing\n  name = map-elites # pick\n\n[tessellation]\ndata_file = \"a#b;c.txt\"\n");
    CHECK(cfg.method.method == Method::map_elites);
    CHECK(cfg.tessellation.data_file == "a#b;c.txt");
}

TEST_CASE("range errors name the key and its line") {
    const std::string e = error_of("[problem]\nm = 6\n[method]\nalpha = 1.5\n");
    CHECK(contains(e, "alpha"));
    CHECK(contains(e, "cfg:4"));
}

TEST_CASE("unknown keys and sections are rejected") {
    const std::string e = error_of("[method]\naplha = 0.5\n");
    CHECK(contains(e, "aplha"));
    CHECK(contains(e, "cfg:2"));
    CHECK(contains(error_of("[methods]\n"), "methods"));
    CHECK(contains(error_of("alpha = 0.5\n"), "before any"));
    CHECK(contains(error_of("[method\n"), "unterminated"));
    CHECK(contains(error_of("[method]\nalpha\n"), "key = value"));
}

TEST_CASE("type mismatches are rejected") {
    CHECK(contains(error_of("[method]\nalpha = fast\n"), "alpha"));
    CHECK(contains(error_of("[problem]\nm = -3\n"), "m"));
    CHECK(contains(error_of("[problem]\nm = 2.5\n"), "m"));
    CHECK(contains(error_of("[output]\nsvg = maybe\n"), "svg"));
    CHECK(contains(error_of("[method]\nname = simulated-annealing\n"), "name"));
}

TEST_CASE("validation rules") {
    CHECK_FALSE(error_of("[problem]\nK = 1\n").empty());
    CHECK_FALSE(error_of("[problem]\ntype = rbm\nd = 20\nhidden = 16\n").empty());
    CHECK_FALSE(error_of("[tessellation]\ncells = 10\nsamples = 5\n").empty());
    CHECK_FALSE(error_of("[method]\ntemperature_mode = local\n").empty());
    CHECK_FALSE(error_of("[problem]\nm = 3\n[method]\nn_flips = 4\n").empty());
    CHECK_FALSE(error_of("[budget]\ninit_count = 0\n").empty());
    CHECK(error_of("[budget]\ninit_count = 0\ninit_file = \"x.txt\"\n").empty());
    CHECK(error_of("[budget]\niterations = 0\n").empty());
}

TEST_CASE("protein-style preset turns on crossover unless set explicitly") {
    CHECK(parse_config_text("[method]\npreset = protein-style\n").method.crossover_fraction == 0.5);
    CHECK(parse_config_text("[method]\npreset = protein-style\ncrossover_fraction = 0.2\n").method.crossover_fraction ==
          0.2);
    CHECK(parse_config_text("[method]\ncrossover_fraction = 0\npreset = protein-style\n").method.crossover_fraction ==
          0.0);
}

TEST_CASE("config text round trip") {
    RunConfig cfg;
    cfg.problem.type = "rbm";
    cfg.problem.seed = 123456789012345ULL;
    cfg.problem.learning_rate = 0.1 + 0.2;
    cfg.method.method = Method::cma_me_proj;
    cfg.method.alpha = 1.0 / 3.0;
    cfg.method.temperature_mode = "per-candidate";
    cfg.method.normalize_gradients = false;
    cfg.tessellation.data_file = "dir with space/data.txt";
    cfg.budget.seed = ~0ULL;
    cfg.output.svg = false;
    const RunConfig back = parse_config_text(to_config_text(cfg));
    CHECK(back == cfg);
    CHECK(to_config_text(back) == to_config_text(cfg));
}

TEST_CASE("json echo round trip") {
    ResolvedConfig r;
    r.run.method.alpha = 0.1;
    r.run.method.sigma_g = 2.0 / 7.0;
    r.run.problem.m = 12;
    r.config_path = "some/path.cfg";
    r.tool_version = std::string(kToolVersion);
    r.timestamp = "2020-01-01T00:00:00Z";
    r.root_seed = 42;
    const std::string j = to_json(r);
    CHECK(resolved_from_json(j) == r);
    CHECK(to_json(resolved_from_json(j)) == j);
    CHECK_THROWS_AS(resolved_from_json("{not json"), ConfigError);
}

TEST_CASE("set_config_value") {
    RunConfig cfg;
    set_config_value(cfg, "alpha", "0.8");
    CHECK(cfg.method.alpha == 0.8);
    set_config_value(cfg, "method.name", "omg-mega-proj");
    CHECK(cfg.method.method == Method::omg_mega_proj);
    set_config_value(cfg, "budget.seed", "7");
    CHECK(cfg.budget.seed == 7);
    CHECK(cfg.problem.seed == 0);
    CHECK_THROWS_AS(set_config_value(cfg, "seed", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(cfg, "nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(cfg, "method.alpha", "x"), ConfigError);
}

TEST_CASE("parse_config reads a file and stamps provenance") {
    const auto dir = test::scratch_dir("config");
    const std::string path = (dir / "run.cfg").string();
    std::ofstream(path) << "[budget]\nseed = 99\n";
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    const ResolvedConfig r = parse_config(path);
    ::unsetenv("SOURCE_DATE_EPOCH");
    CHECK(r.config_path == path);
    CHECK(r.tool_version == kToolVersion);
    CHECK(r.timestamp == "1970-01-02T00:00:00Z");
    CHECK(r.root_seed == 99);
    CHECK_THROWS_AS(parse_config((dir / "missing.cfg").string()), ConfigError);
}

TEST_CASE("format_real keeps 17 significant digits") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0})
        CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
    CHECK(format_real(0.1) == "0.10000000000000001");
}
