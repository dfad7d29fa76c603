#include "qdd/config.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "qdd/error.hpp"

namespace qdd {

std::string_view method_name(Method m) noexcept {
    switch (m) {
    case Method::me_gide: return "me-gide";
    case Method::map_elites: return "map-elites";
    case Method::omg_mega_proj: return "omg-mega-proj";
    case Method::cma_me_proj: return "cma-me-proj";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view s) noexcept {
    for (Method m : {Method::me_gide, Method::map_elites, Method::omg_mega_proj, Method::cma_me_proj})
        if (method_name(m) == s)
            return m;
    return std::nullopt;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("key '" + std::string(key) + "': cannot read '" + std::string(value) + "' as " +
                      std::string(expected));
}

std::string unquote(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
        v = v.substr(1, v.size() - 2);
    return std::string(v);
}

std::uint64_t read_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        bad_value(key, v, "a non-negative integer");
    return out;
}

std::size_t read_size(std::string_view key, std::string_view v) {
    return static_cast<std::size_t>(read_u64(key, v));
}

double read_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    char* end = nullptr;
    const double out = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out))
        bad_value(key, v, "a finite real");
    return out;
}

bool read_bool(std::string_view key, std::string_view v) {
    if (v == "true")
        return true;
    if (v == "false")
        return false;
    bad_value(key, v, "a boolean (true/false)");
}

struct KeySpec {
    std::string_view section;
    std::string_view key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
    bool quoted = false;
};

std::string str(std::size_t v) { return std::to_string(v); }
std::string str(std::uint64_t v, int) { return std::to_string(v); }

const std::vector<KeySpec>& key_table() {
    using C = RunConfig;
    static const std::vector<KeySpec> table = {
        {"problem", "type", [](C& c, std::string_view v) { c.problem.type = unquote(v); },
         [](const C& c) { return c.problem.type; }, true},
        {"problem", "m", [](C& c, std::string_view v) { c.problem.m = read_size("m", v); },
         [](const C& c) { return str(c.problem.m); }},
        {"problem", "K", [](C& c, std::string_view v) { c.problem.K = read_size("K", v); },
         [](const C& c) { return str(c.problem.K); }},
        {"problem", "d", [](C& c, std::string_view v) { c.problem.d = read_size("d", v); },
         [](const C& c) { return str(c.problem.d); }},
        {"problem", "seed", [](C& c, std::string_view v) { c.problem.seed = read_u64("seed", v); },
         [](const C& c) { return str(c.problem.seed, 0); }},
        {"problem", "side", [](C& c, std::string_view v) { c.problem.side = read_size("side", v); },
         [](const C& c) { return str(c.problem.side); }},
        {"problem", "hidden", [](C& c, std::string_view v) { c.problem.hidden = read_size("hidden", v); },
         [](const C& c) { return str(c.problem.hidden); }},
        {"problem", "epochs", [](C& c, std::string_view v) { c.problem.epochs = read_size("epochs", v); },
         [](const C& c) { return str(c.problem.epochs); }},
        {"problem", "learning_rate",
         [](C& c, std::string_view v) { c.problem.learning_rate = read_double("learning_rate", v); },
         [](const C& c) { return format_real(c.problem.learning_rate); }},
        {"problem", "train_batch", [](C& c, std::string_view v) { c.problem.train_batch = read_size("train_batch", v); },
         [](const C& c) { return str(c.problem.train_batch); }},

        {"tessellation", "cells", [](C& c, std::string_view v) { c.tessellation.cells = read_size("cells", v); },
         [](const C& c) { return str(c.tessellation.cells); }},
        {"tessellation", "samples", [](C& c, std::string_view v) { c.tessellation.samples = read_size("samples", v); },
         [](const C& c) { return str(c.tessellation.samples); }},
        {"tessellation", "data_file", [](C& c, std::string_view v) { c.tessellation.data_file = unquote(v); },
         [](const C& c) { return c.tessellation.data_file; }, true},

        {"method", "name",
         [](C& c, std::string_view v) {
             const std::string s = unquote(v);
             const auto m = parse_method(s);
             if (!m)
                 bad_value("name", v, "one of me-gide, map-elites, omg-mega-proj, cma-me-proj");
             c.method.method = *m;
         },
         [](const C& c) { return std::string(method_name(c.method.method)); }, true},
        {"method", "preset", [](C& c, std::string_view v) { c.method.preset = unquote(v); },
         [](const C& c) { return c.method.preset; }, true},
        {"method", "alpha", [](C& c, std::string_view v) { c.method.alpha = read_double("alpha", v); },
         [](const C& c) { return format_real(c.method.alpha); }},
        {"method", "temperature_mode", [](C& c, std::string_view v) { c.method.temperature_mode = unquote(v); },
         [](const C& c) { return c.method.temperature_mode; }, true},
        {"method", "normalize_gradients",
         [](C& c, std::string_view v) { c.method.normalize_gradients = read_bool("normalize_gradients", v); },
         [](const C& c) { return std::string(c.method.normalize_gradients ? "true" : "false"); }},
        {"method", "sigma_g", [](C& c, std::string_view v) { c.method.sigma_g = read_double("sigma_g", v); },
         [](const C& c) { return format_real(c.method.sigma_g); }},
        {"method", "sigma0", [](C& c, std::string_view v) { c.method.sigma0 = read_double("sigma0", v); },
         [](const C& c) { return format_real(c.method.sigma0); }},
        {"method", "n_emitters", [](C& c, std::string_view v) { c.method.n_emitters = read_size("n_emitters", v); },
         [](const C& c) { return str(c.method.n_emitters); }},
        {"method", "cma_max_full_dim",
         [](C& c, std::string_view v) { c.method.cma_max_full_dim = read_size("cma_max_full_dim", v); },
         [](const C& c) { return str(c.method.cma_max_full_dim); }},
        {"method", "n_flips", [](C& c, std::string_view v) { c.method.n_flips = read_size("n_flips", v); },
         [](const C& c) { return str(c.method.n_flips); }},
        {"method", "crossover_fraction",
         [](C& c, std::string_view v) { c.method.crossover_fraction = read_double("crossover_fraction", v); },
         [](const C& c) { return format_real(c.method.crossover_fraction); }},

        {"budget", "batch_size", [](C& c, std::string_view v) { c.budget.batch_size = read_size("batch_size", v); },
         [](const C& c) { return str(c.budget.batch_size); }},
        {"budget", "iterations", [](C& c, std::string_view v) { c.budget.iterations = read_size("iterations", v); },
         [](const C& c) { return str(c.budget.iterations); }},
        {"budget", "init_count", [](C& c, std::string_view v) { c.budget.init_count = read_size("init_count", v); },
         [](const C& c) { return str(c.budget.init_count); }},
        {"budget", "init_file", [](C& c, std::string_view v) { c.budget.init_file = unquote(v); },
         [](const C& c) { return c.budget.init_file; }, true},
        {"budget", "seed", [](C& c, std::string_view v) { c.budget.seed = read_u64("seed", v); },
         [](const C& c) { return str(c.budget.seed, 0); }},

        {"output", "svg", [](C& c, std::string_view v) { c.output.svg = read_bool("svg", v); },
         [](const C& c) { return std::string(c.output.svg ? "true" : "false"); }},
        {"output", "log_interval",
         [](C& c, std::string_view v) { c.output.log_interval = read_size("log_interval", v); },
         [](const C& c) { return str(c.output.log_interval); }},
    };
    return table;
}

const KeySpec* find_key(std::string_view section, std::string_view key) {
    for (const auto& k : key_table())
        if (k.section == section && k.key == key)
            return &k;
    return nullptr;
}

void require(bool ok, std::string_view key, const std::string& msg) {
    if (!ok)
        throw ConfigError("key '" + std::string(key) + "': " + msg, std::string(key));
}

} // namespace

void RunConfig::validate() const {
    require(problem.type == "separable" || problem.type == "rbm", "type", "must be separable or rbm");
    if (problem.type == "separable") {
        require(problem.m >= 1, "m", "must be >= 1");
        require(problem.K >= 2, "K", "must be >= 2");
    } else {
        require(problem.side >= 2 && problem.side <= 16, "side", "must lie in [2, 16]");
        require(problem.hidden >= 1, "hidden", "must be >= 1");
        require(problem.d <= problem.hidden, "d", "must not exceed hidden");
        require(problem.learning_rate > 0.0, "learning_rate", "must be positive");
        require(problem.train_batch >= 1, "train_batch", "must be >= 1");
    }
    require(problem.d >= 1, "d", "must be >= 1");
    require(tessellation.cells >= 1, "cells", "must be >= 1");
    require(tessellation.samples == 0 || tessellation.samples >= tessellation.cells, "samples",
            "must be 0 (default) or at least cells");
    require(method.preset == "none" || method.preset == "protein-style", "preset", "must be none or protein-style");
    require(method.alpha >= 0.0 && method.alpha <= 1.0, "alpha", "must lie in [0, 1]");
    require(method.temperature_mode == "shared" || method.temperature_mode == "per-candidate", "temperature_mode",
            "must be shared or per-candidate");
    require(method.sigma_g > 0.0, "sigma_g", "must be positive");
    require(method.sigma0 > 0.0, "sigma0", "must be positive");
    require(method.n_emitters >= 1, "n_emitters", "must be >= 1");
    require(method.n_flips >= 1, "n_flips", "must be >= 1");
    const std::size_t m = problem.type == "rbm" ? problem.side * problem.side : problem.m;
    require(method.n_flips <= m, "n_flips", "must not exceed the genotype length");
    require(method.crossover_fraction >= 0.0 && method.crossover_fraction <= 1.0, "crossover_fraction",
            "must lie in [0, 1]");
    require(method.crossover_fraction == 0.0 || m >= 2, "crossover_fraction", "crossover needs m >= 2");
    require(budget.batch_size >= 1, "batch_size", "must be >= 1");
    require(!budget.init_file.empty() || budget.init_count >= 1, "init_count",
            "must be >= 1 without an init_file");
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    const KeySpec* spec = nullptr;
    if (const auto dot = key.find('.'); dot != std::string_view::npos) {
        spec = find_key(key.substr(0, dot), key.substr(dot + 1));
    } else {
        for (const auto& k : key_table()) {
            if (k.key != key)
                continue;
            if (spec)
                throw ConfigError("key '" + std::string(key) + "' is ambiguous; qualify it as section.key");
            spec = &k;
        }
    }
    if (!spec)
        throw ConfigError("unknown key '" + std::string(key) + "'");
    spec->set(cfg, trim(value));
}

RunConfig parse_config_text(std::string_view text, std::string_view origin) {
    RunConfig cfg;
    std::string section;
    bool crossover_set = false;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t, std::less<>> key_lines;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        std::string_view line = trim(raw);
        // Strip comments outside quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                quoted = !quoted;
            else if (!quoted && (line[i] == '#' || line[i] == ';')) {
                line = trim(line.substr(0, i));
                break;
            }
        }
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            static constexpr std::string_view known[] = {"problem", "tessellation", "method", "budget", "output"};
            bool ok = false;
            for (auto k : known)
                ok = ok || k == section;
            if (!ok)
                throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(where + "expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError(where + "key '" + std::string(key) + "' appears before any [section]");
        const KeySpec* spec = find_key(section, key);
        if (!spec)
            throw ConfigError(where + "unknown key '" + std::string(key) + "' in [" + section + "]");
        try {
            spec->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
        key_lines[std::string(key)] = line_no;
        crossover_set = crossover_set || (section == "method" && key == "crossover_fraction");
    }
    if (cfg.method.preset == "protein-style" && !crossover_set)
        cfg.method.crossover_fraction = 0.5;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        const auto it = key_lines.find(e.key());
        const std::string where =
            std::string(origin) + (it != key_lines.end() ? ":" + std::to_string(it->second) : std::string());
        throw ConfigError(where + ": " + e.what(), e.key());
    }
    return cfg;
}

namespace {

std::string timestamp_now() {
    std::time_t t = 0;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
        t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
    else
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

ResolvedConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ResolvedConfig r;
    r.run = parse_config_text(buf.str(), path);
    r.config_path = path;
    r.tool_version = std::string(kToolVersion);
    r.timestamp = timestamp_now();
    r.root_seed = r.run.budget.seed;
    return r;
}

std::string to_config_text(const RunConfig& cfg) {
    std::string out;
    std::string_view section;
    for (const auto& k : key_table()) {
        if (k.section != section) {
            if (!section.empty())
                out += '\n';
            section = k.section;
            out += "[" + std::string(section) + "]\n";
        }
        const std::string v = k.get(cfg);
        out += std::string(k.key) + " = " + (k.quoted ? "\"" + v + "\"" : v) + "\n";
    }
    return out;
}

std::string to_json(const ResolvedConfig& cfg) {
    nlohmann::ordered_json j;
    j["config_path"] = cfg.config_path;
    j["tool_version"] = cfg.tool_version;
    j["timestamp"] = cfg.timestamp;
    j["root_seed"] = cfg.root_seed;
    // Values are stored in their canonical text form so reals keep all 17 digits.
    std::string_view section;
    for (const auto& k : key_table()) {
        if (k.section != section)
            section = k.section;
        j["config"][std::string(section)][std::string(k.key)] = k.get(cfg.run);
    }
    return j.dump(2) + "\n";
}

ResolvedConfig resolved_from_json(std::string_view json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config echo: ") + e.what());
    }
    ResolvedConfig r;
    try {
        r.config_path = j.at("config_path").get<std::string>();
        r.tool_version = j.at("tool_version").get<std::string>();
        r.timestamp = j.at("timestamp").get<std::string>();
        r.root_seed = j.at("root_seed").get<std::uint64_t>();
        for (const auto& [section, keys] : j.at("config").items())
            for (const auto& [key, value] : keys.items()) {
                const KeySpec* spec = find_key(section, key);
                if (!spec)
                    throw ConfigError("config echo: unknown key '" + section + "." + key + "'");
                spec->set(r.run, value.get<std::string>());
            }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config echo: ") + e.what());
    }
    r.run.validate();
    return r;
}

} // namespace qdd
