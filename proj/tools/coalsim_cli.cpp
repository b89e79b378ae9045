// coalsim: command-line front end for the genealogy experiments.
//
//   coalsim run <config.json> [--out DIR] [--workers K] [--seed S]
//   coalsim calibrate-ks --n N --replicates R [--trials T] [--seed S]
//   coalsim bounds --corpus-size M --seed S [--out DIR]
//
// Exit codes: 0 ok, 2 bad config or arguments, 3 more than half of the
// replicates censored (the random clock did not reach the horizon), 4 an
// internal consistency check failed.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "coalsim/diagnostics.hpp"
#include "coalsim/errors.hpp"
#include "coalsim/experiment.hpp"
#include "coalsim/kingman.hpp"
#include "coalsim/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitConsistency = 4;

constexpr const char* kSummaryHelp = R"(Output files (every file records the master seed):
  config.json    the parsed config with defaults filled in
  report.json    full report, sample paths included
  summary.csv    genealogy_convergence: N, replicates, censored,
                 ks_first_holding, ks_threshold, mm_fraction, diag_c_tau,
                 diag_sum_c2, diag_sum_d, tmrca_rescaled, tmrca_generations,
                 generations_mean
                 kingman_reference: statistic, value, stderr, threshold, pass
                 coupled_chain: state, exact, empirical
                 bounds_suite: name, trials, violations, worst_margin, constants
  long.csv       N, statistic, value, stderr (plot-ready)
  clock_N*.csv   generation, c, d, cum for replicate 0
  trees.nwk      sample genealogies in Newick form)";

int finish(const coalsim::ExperimentResults& results, const std::string& out) {
    coalsim::emit_outputs(results, out);
    std::cout << "wrote " << out << " (master_seed=" << results.config.master_seed << ")\n";
    if (results.censored_fraction > coalsim::kMaxCensoredFraction) {
        std::cerr << "error: " << results.censored_fraction * 100.0
                  << "% of replicates were censored; the random clock did not reach t_max within hard_cap\n";
        return kExitDivergence;
    }
    if (!results.inequalities_hold) {
        std::cerr << "error: a bound check reported violations, see " << out << "/summary.csv\n";
        return kExitConsistency;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Genealogies of interacting particle systems: simulation and checks"};
    app.footer(kSummaryHelp);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    unsigned workers = 0;
    std::uint64_t seed_override = 0;
    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    run->add_option("--workers", workers, "Worker threads (0: all cores)");
    auto* seed_opt = run->add_option("--seed", seed_override, "Override master_seed");

    std::size_t cal_n = 5, cal_R = 10'000, cal_trials = 1000;
    std::uint64_t cal_seed = 1;
    auto* calibrate = app.add_subcommand("calibrate-ks", "99th-percentile KS null threshold at sample size R");
    calibrate->add_option("--n", cal_n, "Sample size of the Kingman coalescent")->required()->check(CLI::Range(2, 10));
    calibrate->add_option("--replicates", cal_R, "Replicates per KS statistic")->required()->check(CLI::PositiveNumber);
    calibrate->add_option("--trials", cal_trials, "Null draws of the statistic")->check(CLI::Range(10, 1'000'000));
    calibrate->add_option("--seed", cal_seed, "Seed");

    std::size_t corpus_size = 10'000;
    std::uint64_t bounds_seed = 1;
    std::string bounds_out = "bounds_out";
    auto* bounds = app.add_subcommand("bounds", "Run the deterministic inequality suite");
    bounds->add_option("--corpus-size", corpus_size, "Random offspring rows")->required()->check(CLI::PositiveNumber);
    bounds->add_option("--seed", bounds_seed, "Corpus seed")->required();
    bounds->add_option("--out", bounds_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            std::vector<std::string> warnings;
            auto config = coalsim::load_config(config_path, &warnings);
            for (const auto& w : warnings) std::cerr << config_path << ": warning: " << w << "\n";
            if (*seed_opt) config.master_seed = seed_override;
            if (out_dir.empty()) out_dir = config.output_dir;
            return finish(coalsim::run_experiment(config, {workers}), out_dir);
        }
        if (*calibrate) {
            const double threshold = coalsim::ks_null_quantile(cal_R, 0.99, cal_trials, cal_seed);
            // The same quantile from first holding times of simulated
            // Kingman paths, as a check on the distribution-free value.
            const double rate = coalsim::pair_count(cal_n);
            std::vector<double> stats;
            stats.reserve(cal_trials);
            for (std::size_t t = 0; t < cal_trials; ++t) {
                coalsim::Rng rng(coalsim::derive_seed(cal_seed, 5, t));
                std::vector<double> first(cal_R);
                for (auto& x : first) x = coalsim::simulate_kingman(cal_n, rng).events.front().time;
                stats.push_back(coalsim::ks_statistic(first, [rate](double x) {
                    return coalsim::theoretical_cdf(coalsim::CdfKind::exponential, rate, 1, x);
                }));
            }
            std::cout << "n=" << cal_n << " R=" << cal_R << " trials=" << cal_trials << " seed=" << cal_seed << "\n"
                      << "ks_threshold_99=" << coalsim::format_real(threshold) << "\n"
                      << "ks_threshold_99_kingman=" << coalsim::format_real(coalsim::quantile(stats, 0.99)) << "\n";
            return kExitOk;
        }
        coalsim::ExperimentConfig config;
        config.kind = coalsim::ExperimentKind::bounds_suite;
        config.corpus_size = corpus_size;
        config.master_seed = bounds_seed;
        config.output_dir = bounds_out;
        return finish(coalsim::run_experiment(config), bounds_out);
    } catch (const coalsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const coalsim::ConsistencyError& e) {
        std::cerr << "consistency failure: " << e.what() << "\n";
        return kExitConsistency;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
