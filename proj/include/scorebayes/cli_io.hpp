#ifndef SCOREBAYES_CLI_IO_HPP_
#define SCOREBAYES_CLI_IO_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorebayes/estimation.hpp"
#include "scorebayes/numerics.hpp"
#include "scorebayes/posterior.hpp"
#include "scorebayes/priors.hpp"
#include "scorebayes/scoring.hpp"

namespace scorebayes::cli_io {

inline constexpr const char* kVersion = "1.0.0";

/// Problems with user-supplied configuration or data files; maps to exit 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical or I/O failure inside a pipeline; maps to exit 3. The message
/// names the failing operation.
struct PipelineError : std::runtime_error {
    PipelineError(const std::string& op, const std::string& what)
        : std::runtime_error(op + ": " + what), operation(op) {}
    std::string operation;
};

/// Flat key=value experiment description. `seed` is mandatory.
struct ExperimentConfig {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    long integer_or(const std::string& key, long fallback) const;
    std::uint64_t seed() const;

    static ExperimentConfig from_string(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    /// Lossless on-disk form; from_string(to_string()) reproduces the config.
    std::string to_string() const;
};

struct Dataset {
    Matrix values;
    std::vector<std::string> columns;
    /// Index of the column named "y", when present.
    std::optional<Eigen::Index> response;
};

/// CSV with a header row; numeric cells only, NaN rejected with the
/// offending line number.
Dataset read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Dataset& d);

void write_grid_csv(const std::string& path, const numerics::Grid1D& grid,
                    const std::string& name);
void write_chain_csv(const std::string& path, const posterior::Chain& chain,
                     const std::vector<std::string>& names);

struct ResultBundle {
    nlohmann::json doc;
    void write(const std::string& path) const;
};

/// Checks required keys and primitive types against the shipped JSON schema.
void validate_result_bundle(const nlohmann::json& doc, const std::string& schema_path);

ResultBundle cmd_estimate(const ExperimentConfig& cfg, const std::string& out_dir);
ResultBundle cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir);
ResultBundle cmd_prior_eval(const ExperimentConfig& cfg, const std::string& out_dir);
void cmd_reproduce(const std::string& example, const std::string& out_dir, std::uint64_t seed);

}  // namespace scorebayes::cli_io

#endif  // SCOREBAYES_CLI_IO_HPP_
