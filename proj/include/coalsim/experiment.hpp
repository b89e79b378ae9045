#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "coalsim/bounds.hpp"
#include "coalsim/diagnostics.hpp"
#include "coalsim/exactprob.hpp"
#include "coalsim/particle.hpp"
#include "coalsim/replicates.hpp"

namespace coalsim {

/// Invalid configuration. The message starts with "<source>:<line>: ".
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { genealogy_convergence, coupled_chain, bounds_suite, kingman_reference };

std::string_view to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

/// Flat JSON object; every key below except "experiment" is optional.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kingman_reference;
    std::vector<std::size_t> N_grid{50, 200, 1000};
    std::size_t n = 5;
    ResamplingScheme scheme = ResamplingScheme::multinomial;
    WeightModelConfig weights;
    double t_max = 20.0;
    double diag_t = 1.0;
    std::size_t replicates = 2000;
    std::uint64_t master_seed = 1;
    std::size_t hard_cap = 1'000'000;
    std::string output_dir = "out";
    std::size_t ks_calibration_trials = 1000;
    std::size_t newick_trees = 5;
    std::vector<double> fdd_times{0.25, 0.5, 1.0};
    unsigned jump_m_max = 3;
    std::size_t corpus_size = 10'000;
    /// coupled_chain: offspring rows of the fixed environment.
    std::vector<std::vector<std::uint32_t>> environment;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses and validates a config. `source` names the input in messages.
/// Unknown keys, wrong types and invalid values raise ConfigError anchored
/// at the offending line. Advisory problems go to `warnings`.
ExperimentConfig parse_config(const std::string& text, const std::string& source,
                              std::vector<std::string>* warnings = nullptr);
ExperimentConfig load_config(const std::filesystem::path& file, std::vector<std::string>* warnings = nullptr);

/// Every field, defaults included; parse_config(to_json(c).dump()) == c.
nlohmann::json to_json(const ExperimentConfig& c);

nlohmann::json to_json(const GenealogyPath& path);
nlohmann::json to_json(const CoalescentPath& path);
nlohmann::json to_json(const BoundReport& report);

/// A named CSV table.
struct CsvTable {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Everything an experiment writes, held in memory.
struct ExperimentResults {
    ExperimentConfig config;
    nlohmann::json report = nlohmann::json::object();
    std::vector<CsvTable> tables;  // summary.csv and long.csv first
    std::vector<std::pair<std::string, std::string>> text_files;  // name, content
    /// Fraction of censored replicates, worst over the N grid.
    double censored_fraction = 0.0;
    /// False when a bounds_suite run found a violated inequality.
    bool inequalities_hold = true;
};

struct RunOptions {
    unsigned workers = 0;  // 0: OpenMP default
};

/// Runs the experiment. Throws ConsistencyError on internal failures.
ExperimentResults run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes config.json, report.json, the CSV tables and text files into
/// `dir` (created if needed). Each file carries the master seed. Throws
/// std::runtime_error naming the path on I/O failure.
void emit_outputs(const ExperimentResults& results, const std::filesystem::path& dir);

/// Censored fraction above which a run is reported as a clock divergence.
inline constexpr double kMaxCensoredFraction = 0.5;

}  // namespace coalsim
