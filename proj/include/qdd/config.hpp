#pragma once

// Run configuration: the key/value file format, defaults, validation and
// lossless serialisation.
//
// Grammar (one item per line; '#' or ';' starts a comment):
//
//   [section]
//   key = value
//
// Sections and keys (defaults in parentheses):
//
//   [problem]       type (separable) | rbm
//                   m (10), K (4), d (2), seed (0)            separable tables
//                   side (4), hidden (16), epochs (200),
//                   learning_rate (0.05), train_batch (1)      rbm, seed trains it
//   [tessellation]  cells (256), samples (0 = 50 x cells), data_file ("")
//   [method]        name (me-gide) | map-elites | omg-mega-proj | cma-me-proj
//                   preset (none) | protein-style
//                   alpha (0.4), temperature_mode (shared) | per-candidate,
//                   normalize_gradients (true), sigma_g (10), sigma0 (0.5),
//                   n_emitters (5), cma_max_full_dim (256), n_flips (1),
//                   crossover_fraction (0, or 0.5 under protein-style)
//   [budget]        batch_size (64), iterations (100), init_count (1000),
//                   init_file (""), seed (0)
//   [output]        svg (true), log_interval (0 = silent)
//
// Strings may be double-quoted. Booleans are true/false.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qdd {

enum class Method { me_gide, map_elites, omg_mega_proj, cma_me_proj };

std::string_view method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;

struct ProblemConfig {
    std::string type = "separable";
    std::size_t m = 10;
    std::size_t K = 4;
    std::size_t d = 2;
    std::uint64_t seed = 0;
    std::size_t side = 4;
    std::size_t hidden = 16;
    std::size_t epochs = 200;
    double learning_rate = 0.05;
    std::size_t train_batch = 1;

    friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

struct TessellationConfig {
    std::size_t cells = 256;
    std::size_t samples = 0;
    std::string data_file;

    std::size_t effective_samples() const noexcept { return samples ? samples : 50 * cells; }
    friend bool operator==(const TessellationConfig&, const TessellationConfig&) = default;
};

struct MethodConfig {
    Method method = Method::me_gide;
    std::string preset = "none";
    double alpha = 0.4;
    std::string temperature_mode = "shared";
    bool normalize_gradients = true;
    double sigma_g = 10.0;
    double sigma0 = 0.5;
    std::size_t n_emitters = 5;
    std::size_t cma_max_full_dim = 256;
    std::size_t n_flips = 1;
    double crossover_fraction = 0.0;

    friend bool operator==(const MethodConfig&, const MethodConfig&) = default;
};

struct BudgetConfig {
    std::size_t batch_size = 64;
    std::size_t iterations = 100;
    std::size_t init_count = 1000;
    std::string init_file;
    std::uint64_t seed = 0;

    friend bool operator==(const BudgetConfig&, const BudgetConfig&) = default;
};

struct OutputConfig {
    bool svg = true;
    std::size_t log_interval = 0;

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
    ProblemConfig problem;
    TessellationConfig tessellation;
    MethodConfig method;
    BudgetConfig budget;
    OutputConfig output;

    /// Throws ConfigError naming the offending key.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ResolvedConfig {
    RunConfig run;
    std::string config_path;
    std::string tool_version;
    std::string timestamp;
    std::uint64_t root_seed = 0;

    friend bool operator==(const ResolvedConfig&, const ResolvedConfig&) = default;
};

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Parses config text; `origin` names the source in error messages.
RunConfig parse_config_text(std::string_view text, std::string_view origin = "<config>");

/// Reads, parses, validates and stamps provenance. Timestamp honours
/// SOURCE_DATE_EPOCH when set.
ResolvedConfig parse_config(const std::string& path);

/// Sets one key ("section.key" or an unambiguous bare key) from its text
/// form, as the parser would. Used by sweeps.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Canonical config text listing every key; parse_config_text inverts it.
std::string to_config_text(const RunConfig& cfg);

std::string to_json(const ResolvedConfig& cfg);
ResolvedConfig resolved_from_json(std::string_view json);

/// 17 significant digits, the format of every real in every output file.
std::string format_real(double v);

} // namespace qdd
