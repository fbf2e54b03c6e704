#pragma once

// Experiment driver: trains the dense, shortest-path-tree and rate-regularized
// schemes over several seeds, aggregates per-scheme statistics, traces the
// rate/NLL frontier over a λ grid and writes plot-ready CSV files.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dinl/engine.hpp"
#include "dinl/graph.hpp"
#include "dinl/task.hpp"

namespace dinl {

enum class Scheme { dense, dijkstra, dijkstra_rate };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view text);
/// Comma-separated list, e.g. "dense,dijkstra,dijkstra+rate".
std::vector<Scheme> parse_scheme_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
    int version = kConfigVersion;
    TaskSpec task;
    Architecture arch;
    TrainConfig train;
    std::size_t seeds = 6;
    std::uint64_t master_seed = 0;
    double rate_lambda = 0.01;                     // λ of the dijkstra+rate scheme
    std::vector<double> lambda_grid{0.0, 1e-3, 1e-2, 1e-1};
    std::size_t workers = 0;                       // 0: hardware concurrency
    std::string topology;                          // path, relative to the config file
};

/// Parses a versioned JSON config. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text);
/// Loads a config file; a relative `topology` path is resolved against the
/// file's directory.
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// Task spec of one seed: cfg.task with its seed derived from the master seed.
TaskSpec task_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);

struct ExperimentRecord {
    Scheme scheme = Scheme::dense;
    std::uint64_t seed = 0;
    std::size_t edges = 0;
    std::size_t params = 0;
    std::uint64_t bits_per_epoch = 0;
    double accuracy = 0.0;  // test split, percent
    double nll = 0.0;
    double rate = 0.0;      // nats/sample

    friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

/// Per-step hook for external checks; receives the run's scheme, seed,
/// active topology and the completed trace of one optimizer step.
using TraceHook =
    std::function<void(Scheme, std::uint64_t seed, const TrainingTopology&, const WaveTrace&)>;

struct RunOutput {
    ExperimentRecord record;
    std::vector<EpochMetrics> history;
};

/// One (scheme, seed) run: generate the task for the seed, build the scheme's
/// topology, train with rate weight λ and evaluate on
/// the test split. Verifies edge discipline on every step and that every
/// epoch's traffic equals exchange_bits; throws EngineError otherwise.
RunOutput run_single(const GraphSpec& spec, const ExperimentConfig& cfg, Scheme scheme,
                     std::uint64_t seed, double lambda, const TraceHook& hook = {});

/// Records for every (scheme, seed ∈ {0..cfg.seeds−1}), sorted by (scheme,
/// seed). Runs may execute on several threads; output does not depend on it.
std::vector<ExperimentRecord> run_experiment(const GraphSpec& spec, const ExperimentConfig& cfg,
                                             const std::vector<Scheme>& schemes,
                                             const TraceHook& hook = {});

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

Stat mean_std(const std::vector<double>& values);

struct SummaryRow {
    Scheme scheme = Scheme::dense;
    std::size_t seeds = 0;
    Stat edges;
    Stat params;
    Stat bits_per_epoch;
    Stat rate;
    Stat accuracy;
    Stat nll;
};

struct Summary {
    std::vector<SummaryRow> rows;             // ordered by scheme
    std::optional<double> exchange_reduction;  // G_B = 1 − B_spt / B_dense
    std::optional<double> rate_reduction;      // (r_dijkstra − r_rate) / r_dijkstra

    const SummaryRow* find(Scheme s) const;
};

/// Throws std::invalid_argument if a scheme in `required` has no records.
Summary summarize(const std::vector<ExperimentRecord>& records, const std::vector<Scheme>& required = {});

struct FrontierPoint {
    double lambda = 0.0;
    double rate = 0.0;          // seed mean
    double nll = 0.0;           // seed mean
    double accuracy = 0.0;      // seed mean
    double accuracy_std = 0.0;
    std::uint64_t bits_per_epoch = 0;
};

/// Trains the shortest-path-tree scheme at each λ for cfg.seeds seeds and
/// returns seed-averaged points sorted by rate (ascending).
std::vector<FrontierPoint> sweep_lambda(const GraphSpec& spec, const ExperimentConfig& cfg,
                                        const std::vector<double>& grid);

/// Largest λ whose seed-mean accuracy stays within one std of the λ = 0
/// point. Throws std::invalid_argument if the frontier has no λ = 0 point.
double select_rate_lambda(const std::vector<FrontierPoint>& frontier);

struct OutputFiles {
    std::string records;
    std::string summary;
    std::string frontier;
    std::string exchange;
};

/// Writes records.csv, summary.csv, frontier.csv and exchange.csv into `dir`
/// (created if needed).
OutputFiles emit_results(const std::vector<ExperimentRecord>& records, const Summary& summary,
                         const std::vector<FrontierPoint>& frontier, const std::string& dir);

std::vector<ExperimentRecord> read_records_csv(const std::string& path);

/// Human-readable table in the layout of the summary CSV.
std::string format_summary_table(const Summary& summary);

}  // namespace dinl
