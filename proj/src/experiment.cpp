#include "coalsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include "coalsim/errors.hpp"
#include "coalsim/kingman.hpp"

namespace coalsim {

using nlohmann::json;

namespace {

// Sub-stream identifiers for derive_seed.
constexpr std::uint64_t kGenealogyStream = 1;
constexpr std::uint64_t kKingmanStream = 2;
constexpr std::uint64_t kCoupledStream = 3;
constexpr std::uint64_t kCalibrationStream = 4;

constexpr double kKsLevel = 0.99;

}  // namespace

std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::genealogy_convergence: return "genealogy_convergence";
        case ExperimentKind::coupled_chain: return "coupled_chain";
        case ExperimentKind::bounds_suite: return "bounds_suite";
        case ExperimentKind::kingman_reference: return "kingman_reference";
    }
    return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
    for (auto k : {ExperimentKind::genealogy_convergence, ExperimentKind::coupled_chain, ExperimentKind::bounds_suite,
                   ExperimentKind::kingman_reference})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------- config

namespace {

std::size_t line_at_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first `"key"` that is followed by a colon.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    const std::string quoted = '"' + key + '"';
    for (std::size_t pos = text.find(quoted); pos != std::string::npos; pos = text.find(quoted, pos + 1)) {
        std::size_t after = pos + quoted.size();
        while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
        if (after < text.size() && text[after] == ':') return line_at_offset(text, pos);
    }
    return 1;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "experiment", "N_grid", "n", "scheme", "weight_model", "potential", "potential_sigma", "potential_low",
        "potential_high", "potential_p_high", "heritability", "t_max", "diag_t", "replicates", "master_seed",
        "hard_cap", "output_dir", "ks_calibration_trials", "newick_trees", "fdd_times", "jump_m_max",
        "corpus_size", "environment"};
    return keys;
}

class ConfigReader {
  public:
    ConfigReader(const std::string& text, std::string source, const json& j)
        : text_(text), source_(std::move(source)), j_(j) {}

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        throw ConfigError(source_ + ":" + std::to_string(line_of_key(text_, key)) + ": " + key + ": " + message);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::uint64_t unsigned_value(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        return to_unsigned(key, j_.at(key));
    }

    double real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "expected a finite number");
        return x;
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::uint64_t> unsigned_list(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(key, "expected an array");
        std::vector<std::uint64_t> out;
        for (const auto& x : v) out.push_back(to_unsigned(key, x));
        return out;
    }

    std::vector<double> real_list(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(key, "expected an array");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) fail(key, "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<std::vector<std::uint32_t>> matrix(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(key, "expected an array of offspring rows");
        std::vector<std::vector<std::uint32_t>> out;
        for (const auto& row : v) {
            if (!row.is_array()) fail(key, "expected an array of offspring rows");
            std::vector<std::uint32_t> counts;
            for (const auto& x : row) {
                const auto value = to_unsigned(key, x);
                if (value > UINT32_MAX) fail(key, "offspring count too large");
                counts.push_back(static_cast<std::uint32_t>(value));
            }
            out.push_back(std::move(counts));
        }
        return out;
    }

  private:
    std::uint64_t to_unsigned(const std::string& key, const json& v) const {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        fail(key, "expected a non-negative integer");
    }

    const std::string& text_;
    std::string source_;
    const json& j_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source, std::vector<std::string>* warnings) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ":" + std::to_string(line_at_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                          ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw ConfigError(source + ":1: the config must be a JSON object");
    ConfigReader in(text, source, j);
    for (const auto& [key, value] : j.items())
        if (!known_keys().count(key)) in.fail(key, "unknown key");
    if (!in.has("experiment")) throw ConfigError(source + ":1: missing required key \"experiment\"");

    ExperimentConfig c;
    const auto kind = parse_experiment_kind(in.text("experiment", ""));
    if (!kind) in.fail("experiment", "expected one of genealogy_convergence, coupled_chain, bounds_suite, kingman_reference");
    c.kind = *kind;

    if (in.has("N_grid")) {
        c.N_grid.clear();
        for (auto N : in.unsigned_list("N_grid")) c.N_grid.push_back(static_cast<std::size_t>(N));
    }
    c.n = in.unsigned_value("n", c.n);
    if (auto s = parse_scheme(in.text("scheme", std::string(to_string(c.scheme))))) c.scheme = *s;
    else in.fail("scheme", "unknown resampling scheme");
    if (auto m = parse_weight_model(in.text("weight_model", std::string(to_string(c.weights.model))))) c.weights.model = *m;
    else in.fail("weight_model", "unknown weight model");
    if (auto k = parse_potential_kind(in.text("potential", std::string(to_string(c.weights.potential.kind)))))
        c.weights.potential.kind = *k;
    else in.fail("potential", "unknown potential distribution");
    c.weights.potential.sigma = in.real("potential_sigma", c.weights.potential.sigma);
    c.weights.potential.low = in.real("potential_low", c.weights.potential.low);
    c.weights.potential.high = in.real("potential_high", c.weights.potential.high);
    c.weights.potential.p_high = in.real("potential_p_high", c.weights.potential.p_high);
    c.weights.heritability = in.real("heritability", c.weights.heritability);
    c.t_max = in.real("t_max", c.t_max);
    c.diag_t = in.real("diag_t", c.diag_t);
    c.replicates = in.unsigned_value("replicates", c.replicates);
    c.master_seed = in.unsigned_value("master_seed", c.master_seed);
    c.hard_cap = in.unsigned_value("hard_cap", c.hard_cap);
    c.output_dir = in.text("output_dir", c.output_dir);
    c.ks_calibration_trials = in.unsigned_value("ks_calibration_trials", c.ks_calibration_trials);
    c.newick_trees = in.unsigned_value("newick_trees", c.newick_trees);
    if (in.has("fdd_times")) c.fdd_times = in.real_list("fdd_times");
    const auto m_max = in.unsigned_value("jump_m_max", c.jump_m_max);
    if (m_max > 64) in.fail("jump_m_max", "must be at most 64");
    c.jump_m_max = static_cast<unsigned>(m_max);
    c.corpus_size = in.unsigned_value("corpus_size", c.corpus_size);
    if (in.has("environment")) c.environment = in.matrix("environment");

    // Validation.
    if (c.replicates < 1) in.fail("replicates", "must be at least 1");
    if (!(c.t_max > 0.0)) in.fail("t_max", "must be positive");
    if (!(c.diag_t > 0.0) || c.diag_t > c.t_max) in.fail("diag_t", "must lie in (0, t_max]");
    if (c.hard_cap < 1) in.fail("hard_cap", "must be at least 1");
    if (c.jump_m_max < 1) in.fail("jump_m_max", "must be at least 1");
    if (c.ks_calibration_trials < 10) in.fail("ks_calibration_trials", "must be at least 10");
    for (double t : c.fdd_times)
        if (!(t >= 0.0)) in.fail("fdd_times", "times must be non-negative");
    try {
        c.weights.potential.validate();
    } catch (const std::invalid_argument& e) {
        in.fail("potential", e.what());
    }
    if (!(c.weights.heritability >= 0.0)) in.fail("heritability", "must be non-negative");
    if (c.n < 2) in.fail("n", "must be at least 2");

    switch (c.kind) {
        case ExperimentKind::genealogy_convergence: {
            if (c.N_grid.empty()) in.fail("N_grid", "must not be empty");
            for (auto N : c.N_grid)
                if (N < 2) in.fail("N_grid", "population sizes must be at least 2");
            if (c.n > *std::min_element(c.N_grid.begin(), c.N_grid.end()))
                in.fail("n", "sample size exceeds the smallest population in N_grid");
            const auto N_max = *std::max_element(c.N_grid.begin(), c.N_grid.end());
            const double expected = 10.0 * static_cast<double>(N_max) * c.t_max;
            if (warnings && static_cast<double>(c.hard_cap) < expected)
                warnings->push_back("hard_cap " + std::to_string(c.hard_cap) + " is below 10 N t_max = " +
                                    format_real(expected) + "; expect censored replicates");
            break;
        }
        case ExperimentKind::coupled_chain: {
            if (c.environment.empty()) in.fail("environment", "coupled_chain needs at least one offspring row");
            Environment env;
            for (const auto& row : c.environment) env.generations.push_back(OffspringCounts{row});
            try {
                env.validate();
            } catch (const std::invalid_argument& e) {
                in.fail("environment", e.what());
            }
            if (c.n > env.population()) in.fail("n", "sample size exceeds the environment's population");
            if (c.n > 6) in.fail("n", "coupled_chain supports n <= 6");
            break;
        }
        case ExperimentKind::kingman_reference:
            if (c.n > kMaxEnumerableN) in.fail("n", "kingman_reference supports n <= 10");
            break;
        case ExperimentKind::bounds_suite:
            if (c.corpus_size < 1) in.fail("corpus_size", "must be at least 1");
            break;
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file, std::vector<std::string>* warnings) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string() + ":0: cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), file.string(), warnings);
}

json to_json(const ExperimentConfig& c) {
    return json{{"experiment", to_string(c.kind)},
                {"N_grid", c.N_grid},
                {"n", c.n},
                {"scheme", to_string(c.scheme)},
                {"weight_model", to_string(c.weights.model)},
                {"potential", to_string(c.weights.potential.kind)},
                {"potential_sigma", c.weights.potential.sigma},
                {"potential_low", c.weights.potential.low},
                {"potential_high", c.weights.potential.high},
                {"potential_p_high", c.weights.potential.p_high},
                {"heritability", c.weights.heritability},
                {"t_max", c.t_max},
                {"diag_t", c.diag_t},
                {"replicates", c.replicates},
                {"master_seed", c.master_seed},
                {"hard_cap", c.hard_cap},
                {"output_dir", c.output_dir},
                {"ks_calibration_trials", c.ks_calibration_trials},
                {"newick_trees", c.newick_trees},
                {"fdd_times", c.fdd_times},
                {"jump_m_max", c.jump_m_max},
                {"corpus_size", c.corpus_size},
                {"environment", c.environment}};
}

json to_json(const GenealogyPath& path) {
    json events = json::array();
    for (const auto& e : path.events)
        events.push_back({{"generation", e.generation}, {"rescaled_time", e.rescaled_time},
                          {"partition", e.partition.to_string()}});
    return {{"n", path.n},
            {"N", path.population},
            {"end", to_string(path.end)},
            {"generations_traced", path.generations_traced},
            {"end_time", path.end_time},
            {"events", events}};
}

json to_json(const CoalescentPath& path) {
    json events = json::array();
    for (const auto& e : path.events) events.push_back({{"time", e.time}, {"partition", e.partition.to_string()}});
    return {{"n", path.n}, {"events", events}};
}

json to_json(const BoundReport& r) {
    json out{{"name", r.name}, {"trials", r.trials}, {"violations", r.violations}, {"witness", r.witness}};
    out["worst_margin"] = std::isfinite(r.worst_margin) ? json(r.worst_margin) : json(nullptr);
    out["constants"] = json::object();
    for (const auto& [k, v] : r.constants) out["constants"][k] = v;
    return out;
}

// ---------------------------------------------------------------- runners

namespace {

std::string num(double x) { return format_real(x); }
std::string num(std::size_t x) { return std::to_string(x); }

json real_or_null(std::optional<double> x) { return x ? json(*x) : json(nullptr); }

struct LongRows {
    CsvTable table{"long.csv", {"N", "statistic", "value", "stderr"}, {}};
    void add(const std::string& N, const std::string& statistic, double value, std::optional<double> err = {}) {
        table.rows.push_back({N, statistic, num(value), err ? num(*err) : ""});
    }
};

double binomial_stderr(const MergerFraction& f) {
    const double p = f.fraction();
    return f.events ? std::sqrt(p * (1.0 - p) / static_cast<double>(f.events)) : 0.0;
}

std::string seed_comment(std::uint64_t seed) { return "master_seed=" + std::to_string(seed); }

std::string newick_file(std::uint64_t seed, const std::vector<std::string>& trees) {
    std::string out = "[" + seed_comment(seed) + "]\n";
    for (const auto& t : trees) out += t + "\n";
    return out;
}

double calibrated_threshold(const ExperimentConfig& c, std::size_t R) {
    return ks_null_quantile(R, kKsLevel, c.ks_calibration_trials, derive_seed(c.master_seed, kCalibrationStream, R));
}

json holding_json(const HoldingTimeTest& ht) {
    json levels = json::array();
    for (const auto& l : ht.levels)
        levels.push_back({{"blocks", l.blocks}, {"rate", l.rate}, {"samples", l.samples}, {"ks", l.ks}});
    return {{"levels", levels}, {"consecutive_correlation", ht.consecutive_correlation}};
}

ExperimentResults run_kingman(const ExperimentConfig& c, const RunOptions& options) {
    ExperimentResults res;
    res.config = c;
    const std::size_t R = c.replicates;
    const auto paths = run_kingman_replicates(c.n, c.jump_m_max, c.master_seed, kKingmanStream, R, options.workers);
    const double threshold = calibrated_threshold(c, R);

    std::vector<PathStatistics> stats;
    std::vector<CoalescentPath> plain;
    std::vector<std::vector<double>> counters;
    std::vector<double> tmrca;
    for (const auto& p : paths) {
        stats.push_back(path_statistics(p.path));
        plain.push_back(p.path);
        counters.push_back(p.counter_jumps);
        tmrca.push_back(*stats.back().tmrca);
    }

    CsvTable summary{"summary.csv", {"statistic", "value", "stderr", "threshold", "pass"}, {}};
    LongRows long_rows;
    const std::string N_label = "inf";
    json report{{"kind", "kingman_reference"}, {"master_seed", c.master_seed}, {"n", c.n}, {"replicates", R},
                {"ks_threshold", threshold}, {"ks_level", kKsLevel}};
    bool all_pass = true;

    if (R >= kMinTestReplicates) {
        const auto ht = holding_time_test(stats, c.n);
        report["holding_times"] = holding_json(ht);
        for (const auto& l : ht.levels) {
            const bool pass = l.ks < threshold;
            all_pass = all_pass && pass;
            summary.rows.push_back({"ks_level_" + num(l.blocks), num(l.ks), "", num(threshold), pass ? "1" : "0"});
            long_rows.add(N_label, "ks_level_" + num(l.blocks), l.ks);
        }
        json jumps = json::array();
        for (unsigned m = 1; m <= c.jump_m_max; ++m) {
            const auto jt = jump_time_test(counters, c.n, m);
            const bool pass = jt.ks < threshold;
            all_pass = all_pass && pass;
            jumps.push_back({{"m", m}, {"samples", jt.samples}, {"ks", jt.ks}});
            summary.rows.push_back({"ks_jump_" + std::to_string(m), num(jt.ks), "", num(threshold), pass ? "1" : "0"});
            long_rows.add(N_label, "ks_jump_" + std::to_string(m), jt.ks);
        }
        report["jump_times"] = jumps;
    }

    const auto t = mean_estimate(tmrca);
    double expected = 0.0;
    for (std::size_t k = 2; k <= c.n; ++k) expected += 1.0 / pair_count(k);
    const bool tmrca_pass = std::fabs(t.mean - expected) <= 3.0 * t.stderr_;
    report["tmrca"] = {{"mean", t.mean}, {"stderr", t.stderr_}, {"expected", expected}, {"within_3_stderr", tmrca_pass}};
    summary.rows.push_back({"tmrca_mean", num(t.mean), num(t.stderr_), num(expected), tmrca_pass ? "1" : "0"});
    long_rows.add(N_label, "tmrca", t.mean, t.stderr_);

    const auto mm = multiple_merger_fraction(plain);
    report["multiple_merger_fraction"] = mm.fraction();
    long_rows.add(N_label, "mm_fraction", mm.fraction(), binomial_stderr(mm));

    if (c.n <= 6 && R >= kMinFddReplicates && !c.fdd_times.empty()) {
        const auto tv = fdd_compare(plain, c.n, c.fdd_times);
        json fdd = json::array();
        for (std::size_t i = 0; i < tv.size(); ++i) {
            fdd.push_back({{"t", c.fdd_times[i]}, {"tv", tv[i]}});
            long_rows.add(N_label, "fdd_tv_t=" + num(c.fdd_times[i]), tv[i]);
        }
        report["fdd_tv"] = fdd;
    }
    report["all_pass"] = all_pass && tmrca_pass;

    std::vector<std::string> trees;
    json sample_paths = json::array();
    for (std::size_t i = 0; i < std::min(c.newick_trees, plain.size()); ++i) {
        trees.push_back(to_newick(plain[i]));
        sample_paths.push_back(to_json(plain[i]));
    }
    report["sample_paths"] = sample_paths;
    res.text_files.emplace_back("trees.nwk", newick_file(c.master_seed, trees));
    res.report = report;
    res.tables.push_back(summary);
    res.tables.push_back(long_rows.table);
    return res;
}

ExperimentResults run_genealogy(const ExperimentConfig& c, const RunOptions& options) {
    ExperimentResults res;
    res.config = c;
    const std::size_t R = c.replicates;
    const double threshold = calibrated_threshold(c, R);

    CsvTable summary{"summary.csv",
                     {"N", "replicates", "censored", "ks_first_holding", "ks_threshold", "mm_fraction", "diag_c_tau",
                      "diag_sum_c2", "diag_sum_d", "tmrca_rescaled", "tmrca_generations", "generations_mean"},
                     {}};
    LongRows long_rows;
    json per_N = json::array();
    std::vector<std::vector<ReplicateResult>> runs;
    std::vector<double> ks_first, mm_fractions;
    std::vector<std::string> trees;
    json sample_paths = json::object();

    for (std::size_t N : c.N_grid) {
        ReplicateSpec spec{c.n, N, c.scheme, c.weights, c.t_max, c.diag_t, c.hard_cap, false};
        auto results = run_replicates_parallel(spec, c.master_seed, kGenealogyStream, R, options.workers);
        const std::string label = std::to_string(N);

        std::size_t censored = 0;
        std::vector<PathStatistics> stats;
        std::vector<GenealogyPath> paths;
        std::vector<std::vector<double>> counters;
        std::vector<double> tmrca, tmrca_gen, generations, min_gaps, first_gaps;
        for (const auto& r : results) {
            generations.push_back(static_cast<double>(r.generations));
            if (r.censored) {
                ++censored;
                continue;
            }
            stats.push_back(path_statistics(r.path));
            paths.push_back(r.path);
            counters.push_back(r.counter_jumps);
            const auto& s = stats.back();
            if (s.tmrca) {
                tmrca.push_back(*s.tmrca);
                tmrca_gen.push_back(static_cast<double>(r.path.events.back().generation));
            }
            if (std::isfinite(s.min_jump_gap)) min_gaps.push_back(s.min_jump_gap);
            if (std::isfinite(s.first_jump_gap)) first_gaps.push_back(s.first_jump_gap);
        }
        res.censored_fraction = std::max(res.censored_fraction, static_cast<double>(censored) / static_cast<double>(R));

        json entry{{"N", N}, {"replicates", R}, {"censored", censored}};
        std::optional<double> ks0;
        if (stats.size() >= kMinTestReplicates) {
            const auto ht = holding_time_test(stats, c.n);
            entry["ks_holding"] = holding_json(ht);
            ks0 = ht.levels.front().ks;
            for (const auto& l : ht.levels) long_rows.add(label, "ks_level_" + num(l.blocks), l.ks);
            json jumps = json::array();
            for (unsigned m = 1; m <= c.jump_m_max; ++m) {
                try {
                    const auto jt = jump_time_test(counters, c.n, m);
                    jumps.push_back({{"m", m}, {"samples", jt.samples}, {"ks", jt.ks}});
                    long_rows.add(label, "ks_jump_" + std::to_string(m), jt.ks);
                } catch (const std::invalid_argument&) {
                    jumps.push_back({{"m", m}, {"samples", 0}, {"ks", nullptr}});
                }
            }
            entry["ks_jump"] = jumps;
        }
        entry["ks_first_holding"] = real_or_null(ks0);
        ks_first.push_back(ks0.value_or(1.0));

        std::optional<double> mm_value;
        try {
            const auto mm = multiple_merger_fraction(paths);
            mm_value = mm.fraction();
            entry["multiple_merger"] = {{"events", mm.events}, {"multiple", mm.multiple}, {"fraction", mm.fraction()}};
            long_rows.add(label, "mm_fraction", mm.fraction(), binomial_stderr(mm));
        } catch (const std::invalid_argument&) {
            entry["multiple_merger"] = nullptr;
        }
        mm_fractions.push_back(mm_value.value_or(1.0));

        json gaps = json::object();
        for (double q : {0.01, 0.1, 0.5}) {
            if (!min_gaps.empty()) gaps["min_gap_q" + num(q)] = quantile(min_gaps, q);
            if (!first_gaps.empty()) gaps["first_gap_q" + num(q)] = quantile(first_gaps, q);
        }
        entry["gap_quantiles"] = gaps;
        for (const auto& [key, value] : gaps.items()) long_rows.add(label, key, value.get<double>());

        const auto t_resc = mean_estimate(tmrca);
        const auto t_gen = mean_estimate(tmrca_gen);
        const auto gens = mean_estimate(generations);
        entry["tmrca"] = {{"rescaled_mean", t_resc.mean}, {"rescaled_stderr", t_resc.stderr_},
                          {"generations_mean", t_gen.mean}, {"generations_stderr", t_gen.stderr_},
                          {"coalesced", tmrca.size()}};
        long_rows.add(label, "tmrca_rescaled", t_resc.mean, t_resc.stderr_);
        long_rows.add(label, "tmrca_generations", t_gen.mean, t_gen.stderr_);
        long_rows.add(label, "generations_simulated", gens.mean, gens.stderr_);

        if (c.n <= 6 && paths.size() >= kMinFddReplicates && !c.fdd_times.empty()) {
            try {
                const auto tv = fdd_compare(paths, c.n, c.fdd_times);
                json fdd = json::array();
                for (std::size_t i = 0; i < tv.size(); ++i) {
                    fdd.push_back({{"t", c.fdd_times[i]}, {"tv", tv[i]}});
                    long_rows.add(label, "fdd_tv_t=" + num(c.fdd_times[i]), tv[i]);
                }
                entry["fdd_tv"] = fdd;
            } catch (const std::invalid_argument&) {
                entry["fdd_tv"] = nullptr;
            }
        }

        // Clock of replicate 0, regenerated with recording on.
        spec.record_clock = true;
        const auto first = simulate_replicate(spec, derive_seed(c.master_seed, kGenealogyStream, 0));
        CsvTable clock{"clock_N" + label + ".csv", {"generation", "c", "d", "cum"}, {}};
        for (const auto& r : first.clock) clock.rows.push_back({num(r.generation), num(r.c), num(r.d), num(r.cum)});
        res.tables.push_back(std::move(clock));

        json path_list = json::array();
        for (std::size_t i = 0, written = 0; i < paths.size() && written < c.newick_trees; ++i) {
            if (paths[i].end != PathEnd::coalesced) continue;
            trees.push_back("[N=" + label + "] " + to_newick(paths[i]));
            path_list.push_back(to_json(paths[i]));
            ++written;
        }
        sample_paths[label] = path_list;

        per_N.push_back(entry);
        summary.rows.push_back({label, num(R), num(censored), ks0 ? num(*ks0) : "", num(threshold),
                                mm_value ? num(*mm_value) : "", "", "", "", num(t_resc.mean), num(t_gen.mean),
                                num(gens.mean)});
        runs.push_back(std::move(results));
    }

    const auto diag = asymptotic_diagnostics(c.N_grid, runs);
    json diag_rows = json::array();
    for (std::size_t i = 0; i < diag.rows.size(); ++i) {
        const auto& d = diag.rows[i];
        diag_rows.push_back({{"N", d.N},
                             {"used", d.used},
                             {"censored", d.censored},
                             {"c_tau", {{"mean", d.c_tau.mean}, {"stderr", d.c_tau.stderr_}}},
                             {"sum_c2", {{"mean", d.sum_c2.mean}, {"stderr", d.sum_c2.stderr_}}},
                             {"sum_d", {{"mean", d.sum_d.mean}, {"stderr", d.sum_d.stderr_}}}});
        const std::string label = std::to_string(d.N);
        long_rows.add(label, "diag_c_tau", d.c_tau.mean, d.c_tau.stderr_);
        long_rows.add(label, "diag_sum_c2", d.sum_c2.mean, d.sum_c2.stderr_);
        long_rows.add(label, "diag_sum_d", d.sum_d.mean, d.sum_d.stderr_);
        summary.rows[i][6] = num(d.c_tau.mean);
        summary.rows[i][7] = num(d.sum_c2.mean);
        summary.rows[i][8] = num(d.sum_d.mean);
    }

    json report{{"kind", "genealogy_convergence"},
                {"master_seed", c.master_seed},
                {"n", c.n},
                {"replicates", R},
                {"scheme", to_string(c.scheme)},
                {"weight_model", to_string(c.weights.model)},
                {"N_grid", c.N_grid},
                {"ks_threshold", threshold},
                {"ks_level", kKsLevel},
                {"diag_t", c.diag_t},
                {"per_N", per_N},
                {"asymptotic_diagnostics", diag_rows},
                {"censored_fraction", res.censored_fraction}};
    report["trends"] = {{"ks_first_holding_decreasing", strictly_decreasing(ks_first)},
                        {"ks_first_holding_below_threshold_at_largest_N", ks_first.back() < threshold},
                        {"mm_fraction_decreasing", strictly_decreasing(mm_fractions)},
                        {"diag_c_tau_decreasing", diag.c_tau_decreasing},
                        {"diag_sum_c2_decreasing", diag.sum_c2_decreasing},
                        {"diag_sum_d_decreasing", diag.sum_d_decreasing}};
    report["sample_paths"] = sample_paths;
    res.report = report;
    res.tables.insert(res.tables.begin(), long_rows.table);
    res.tables.insert(res.tables.begin(), summary);
    res.text_files.emplace_back("trees.nwk", newick_file(c.master_seed, trees));
    return res;
}

ExperimentResults run_coupled(const ExperimentConfig& c, const RunOptions& options) {
    ExperimentResults res;
    res.config = c;
    Environment env;
    for (const auto& row : c.environment) env.generations.push_back(OffspringCounts::from(row));
    const CoupledChainKernel kernel(c.n, env);
    const auto& states = kernel.states();
    const std::size_t S = states.size();

    // Exact law of S_T: the singletons row pushed through each generation.
    std::vector<Rational> exact(S, Rational(0));
    exact.back() = 1;
    for (std::size_t g = 0; g < env.generations.size(); ++g) {
        std::vector<Rational> next(S, Rational(0));
        for (std::size_t i = 0; i < S; ++i) {
            if (exact[i] == 0) continue;
            for (std::size_t j = 0; j < S; ++j)
                next[j] += exact[i] * transition_probability_exact(states[i], states[j], env.generations[g]);
        }
        exact = std::move(next);
        std::ostringstream csv;
        write_transition_csv(csv, transition_matrix(c.n, env.generations[g]));
        res.text_files.emplace_back("transition_g" + std::to_string(g + 1) + ".csv",
                                    "# " + seed_comment(c.master_seed) + "\n" + csv.str());
    }

    bool case2_zero = true;
    for (const auto& nu : env.generations) case2_zero = case2_zero && coupled_row(states.back(), nu).counter_only == 0.0;

    constexpr std::size_t kBlock = 10'000;
    const std::size_t runs = c.replicates;
    const std::size_t blocks = (runs + kBlock - 1) / kBlock;
    std::vector<std::vector<std::uint64_t>> histograms(blocks, std::vector<std::uint64_t>(S, 0));
    std::vector<std::uint64_t> violations(blocks, 0), changes(blocks, 0), steps(blocks, 0);
    std::vector<std::exception_ptr> errors(blocks);
    const int threads = options.workers == 0 ? omp_get_max_threads() : static_cast<int>(options.workers);
    const auto total_blocks = static_cast<long long>(blocks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long b = 0; b < total_blocks; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        try {
            Rng rng(derive_seed(c.master_seed, kCoupledStream, bi));
            const std::size_t count = std::min(kBlock, runs - bi * kBlock);
            for (std::size_t r = 0; r < count; ++r) {
                const auto path = kernel.run(rng);
                for (std::size_t t = 1; t < path.size(); ++t) {
                    ++steps[bi];
                    const bool moved = !(path[t].s == path[t - 1].s);
                    const auto dz = path[t].z - path[t - 1].z;
                    if (moved) ++changes[bi];
                    if (path[t].z < path[t - 1].z || dz > 1 || (moved && dz != 1)) ++violations[bi];
                }
                const auto it = std::lower_bound(states.begin(), states.end(), path.back().s);
                ++histograms[bi][static_cast<std::size_t>(it - states.begin())];
            }
        } catch (...) {
            errors[bi] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<std::uint64_t> histogram(S, 0);
    std::uint64_t violation_total = 0, change_total = 0, step_total = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t i = 0; i < S; ++i) histogram[i] += histograms[b][i];
        violation_total += violations[b];
        change_total += changes[b];
        step_total += steps[b];
    }

    CsvTable summary{"summary.csv", {"state", "exact", "empirical"}, {}};
    LongRows long_rows;
    json law = json::array();
    double tv = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double p = exact[i].convert_to<double>();
        const double q = runs ? static_cast<double>(histogram[i]) / static_cast<double>(runs) : 0.0;
        tv += std::fabs(p - q);
        summary.rows.push_back({states[i].to_string(), num(p), num(q)});
        law.push_back({{"state", states[i].to_string()}, {"exact", p}, {"exact_rational", exact[i].str()}, {"empirical", q}});
    }
    tv *= 0.5;
    long_rows.add(std::to_string(env.population()), "tv_final_law", tv);
    res.report = {{"kind", "coupled_chain"},
                  {"master_seed", c.master_seed},
                  {"n", c.n},
                  {"N", env.population()},
                  {"generations", env.generations.size()},
                  {"runs", runs},
                  {"final_law", law},
                  {"tv", tv},
                  {"counter_only_at_singletons_is_zero", case2_zero},
                  {"steps_checked", step_total},
                  {"partition_changes", change_total},
                  {"coupling_violations", violation_total}};
    res.tables.push_back(summary);
    res.tables.push_back(long_rows.table);
    return res;
}

ExperimentResults run_bounds(const ExperimentConfig& c) {
    ExperimentResults res;
    res.config = c;
    BoundsSuiteConfig suite;
    suite.corpus_size = c.corpus_size;
    suite.seed = c.master_seed;
    const auto reports = run_bounds_suite(suite);
    CsvTable summary{"summary.csv", {"name", "trials", "violations", "worst_margin", "constants"}, {}};
    LongRows long_rows;
    json list = json::array();
    for (const auto& r : reports) {
        list.push_back(to_json(r));
        std::string constants;
        for (const auto& [k, v] : r.constants) constants += (constants.empty() ? "" : ";") + k + "=" + num(v);
        summary.rows.push_back({r.name, num(r.trials), num(r.violations),
                                std::isfinite(r.worst_margin) ? num(r.worst_margin) : "", constants});
        long_rows.add("", r.name + "_violations", static_cast<double>(r.violations));
        res.inequalities_hold = res.inequalities_hold && r.violations == 0;
    }
    res.report = {{"kind", "bounds_suite"},
                  {"master_seed", c.master_seed},
                  {"corpus_size", c.corpus_size},
                  {"reports", list},
                  {"all_hold", res.inequalities_hold}};
    res.tables.push_back(summary);
    res.tables.push_back(long_rows.table);
    return res;
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    switch (config.kind) {
        case ExperimentKind::kingman_reference: return run_kingman(config, options);
        case ExperimentKind::genealogy_convergence: return run_genealogy(config, options);
        case ExperimentKind::coupled_chain: return run_coupled(config, options);
        case ExperimentKind::bounds_suite: return run_bounds(config);
    }
    throw std::logic_error("unknown experiment kind");
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

void write_file(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace

void emit_outputs(const ExperimentResults& results, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    const auto seed = results.config.master_seed;

    write_file(dir / "config.json", to_json(results.config).dump(2) + "\n");
    json report = results.report;
    report["master_seed"] = seed;
    write_file(dir / "report.json", report.dump(2) + "\n");

    auto tables = results.tables;
    auto has = [&](const std::string& name) {
        return std::any_of(tables.begin(), tables.end(), [&](const CsvTable& t) { return t.file == name; });
    };
    if (!has("summary.csv")) tables.push_back({"summary.csv", {"statistic", "value"}, {}});
    if (!has("long.csv")) tables.push_back({"long.csv", {"N", "statistic", "value", "stderr"}, {}});
    for (const auto& t : tables) {
        std::string out = "# " + seed_comment(seed) + "\n";
        for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_field(t.header[i]);
        out += "\n";
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
            out += "\n";
        }
        write_file(dir / t.file, out);
    }
    for (const auto& [name, content] : results.text_files) write_file(dir / name, content);
}

}  // namespace coalsim
