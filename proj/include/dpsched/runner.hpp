#pragma once

#include "dpsched/core_model.hpp"
#include "dpsched/link_sim.hpp"
#include "dpsched/metrics.hpp"
#include "dpsched/scheduler.hpp"
#include "dpsched/trace_io.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpsched {

// Everything about a run except where its inputs come from.
struct RunParams {
    std::string scheduler = "proposed";
    MidBranch mid_branch = MidBranch::intended;
    double rtt_ms = 80.0;
    double loss_rate = 0.005;
    std::uint64_t seed = 1;
    double alpha = kDefaultAlpha;
    double low_mbps = 0.8;
    double high_mbps = 2.3;
    double duration_s = 30.0;
    // Scales block sizes so the scenario offers this fraction of the trace's
    // mean capacity. Zero or negative keeps the sizes from the file.
    double offered_load = 0.8;
    bool record_log = true;

    void validate() const;
};

struct RunConfig {
    RunParams params;
    std::filesystem::path scenario_path;
    std::filesystem::path trace_path;
    std::filesystem::path output_path;     // report (JSON lines); empty = stdout
    std::filesystem::path event_log_path;  // optional
};

struct RunResult {
    QoEReport report;
    ReportMetadata meta;
    std::vector<Block> blocks;
    std::vector<LogRecord> log;
    double offered_bytes = 0.0;
    std::uint64_t transmissions = 0;
    std::uint64_t losses = 0;
};

RunResult run_simulation(const ScenarioConfig& scenario, const LinkTrace& trace, const RunParams& params);

// Loads the scenario and trace, runs, writes the report and (optionally)
// the event log.
RunResult run_single(const RunConfig& config);

void write_event_log(std::ostream& out, std::span<const LogRecord> log, std::span<const Block> blocks);

struct ComparisonRow {
    std::string scheduler;
    std::string scenario;
    std::string trace_group;
    std::size_t runs = 0;
    double delivery_ratio = 0.0;
    double utilization = 0.0;
    double effective_utilization = 0.0;
    double qoe = 0.0;
    // Baseline rows: proposed's gain over this row, in percent.
    // Proposed row: gain over the strongest baseline in the same group.
    std::optional<double> qoe_gain_pct;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
};

struct NamedScenario {
    std::string name;
    ScenarioConfig config;
};

struct SweepPlan {
    std::vector<LinkTrace> traces;
    std::vector<NamedScenario> scenarios;
    std::vector<std::string> schedulers;
    std::vector<std::uint64_t> seeds;
    RunParams base;
    std::string trace_group = "corpus";
    std::filesystem::path output_dir;  // runs/ records, table.txt, table.jsonl
    unsigned jobs = 0;                 // 0 = hardware concurrency
};

struct SweepStats {
    std::size_t executed = 0;
    std::size_t reused = 0;
};

// Runs every (scheduler, scenario, trace, seed) combination not already
// recorded under output_dir/runs, then rebuilds the table from the records.
ComparisonTable run_sweep(const SweepPlan& plan, SweepStats* stats = nullptr);

// Loads and filters the corpus directory first; throws ConfigError naming
// the thresholds when nothing survives the filter.
ComparisonTable run_sweep_from_corpus(const std::filesystem::path& corpus_dir,
                                      const std::vector<std::filesystem::path>& scenario_paths,
                                      SweepPlan plan, const CorpusFilter& filter = {},
                                      SweepStats* stats = nullptr);

std::string record_file_name(const std::string& scheduler, const std::string& scenario, const std::string& trace,
                             std::uint64_t seed);

ComparisonTable table_from_records(const std::filesystem::path& runs_dir);
std::string render_table(const ComparisonTable& table);
std::string table_to_jsonl(const ComparisonTable& table);
void write_table_files(const std::filesystem::path& output_dir, const ComparisonTable& table);

struct TuneCell {
    double low_mbps = 0.0;
    double high_mbps = 0.0;
    double mean_qoe = 0.0;
    std::size_t runs = 0;
};

struct TuneResult {
    std::vector<TuneCell> cells;
    TuneCell best;
    std::size_t train_traces = 0;
    std::size_t test_traces = 0;
};

// First cell with the highest mean QoE. Throws ConfigError on an empty list.
TuneCell select_best_cell(std::span<const TuneCell> cells);

struct TunePlan {
    std::vector<std::pair<double, double>> grid;  // (L, H) in Mbps
    std::vector<LinkTrace> traces;                // full corpus, split inside
    ScenarioConfig scenario;
    std::vector<std::uint64_t> seeds{1};
    RunParams base;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 7;
    std::filesystem::path output_path;  // grid results (JSON lines), optional
    unsigned jobs = 0;
};

// Grid search of the proposed scheduler's thresholds by mean QoE on the
// training split.
TuneResult tune_thresholds(const TunePlan& plan);

std::vector<std::pair<double, double>> make_grid(std::span<const double> lows, std::span<const double> highs);

// Runs fn(i) for i in [0, n) over `jobs` worker threads; rethrows the first
// failure after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dpsched
