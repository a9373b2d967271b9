// Command-line front end: single runs, comparison sweeps, threshold tuning,
// trace utilities and table re-rendering.

#include "dpsched/errors.hpp"
#include "dpsched/runner.hpp"
#include "dpsched/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace dpsched;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitInvariant = 2;

void add_run_params(CLI::App* cmd, RunParams& p, bool with_scheduler) {
    if (with_scheduler) {
        cmd->add_option("--scheduler", p.scheduler, "proposed | fifo | sfra | ldf | rswn")->capture_default_str();
    }
    cmd->add_option("--rtt-ms", p.rtt_ms, "round-trip time in ms")->capture_default_str();
    cmd->add_option("--loss-rate", p.loss_rate, "random loss probability per transmission")->capture_default_str();
    cmd->add_option("--alpha", p.alpha, "utilization weight in QoE")->capture_default_str();
    cmd->add_option("--low-mbps", p.low_mbps, "low-bandwidth threshold L")->capture_default_str();
    cmd->add_option("--high-mbps", p.high_mbps, "high-bandwidth threshold H")->capture_default_str();
    cmd->add_option("--duration", p.duration_s, "stream length in seconds")->capture_default_str();
    cmd->add_option("--offered-load", p.offered_load,
                    "scale blocks to this fraction of the trace mean (<= 0 keeps file sizes)")
        ->capture_default_str();
}

void print_trace_summary(const LinkTrace& t) {
    nlohmann::ordered_json j;
    j["trace"] = t.source_tag;
    j["samples"] = t.samples.size();
    j["duration_s"] = t.duration;
    j["mean_mbps"] = bytes_per_s_to_mbps(t.mean_bps());
    j["min_mbps"] = bytes_per_s_to_mbps(t.min_bps());
    j["max_mbps"] = bytes_per_s_to_mbps(t.max_bps());
    j["passes_filter"] = passes_filter(t);
    std::cout << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deadline- and priority-aware block scheduling simulator"};
    app.require_subcommand(1);

    // run
    RunConfig run_cfg;
    bool literal_mid = false;
    auto* run = app.add_subcommand("run", "simulate one (scenario, trace, scheduler) combination");
    run->add_option("--scenario", run_cfg.scenario_path, "scenario JSON file")->required();
    run->add_option("--trace", run_cfg.trace_path, "trace file (.csv or packet-opportunity)")->required();
    run->add_option("--seed", run_cfg.params.seed, "seed for block sizes and loss draws")->capture_default_str();
    run->add_option("--output", run_cfg.output_path, "report path (default stdout)");
    run->add_option("--event-log", run_cfg.event_log_path, "write the full event log here");
    run->add_flag("--literal-mid", literal_mid, "use the mid-bandwidth branch exactly as printed");
    add_run_params(run, run_cfg.params, true);

    // sweep
    SweepPlan sweep_plan;
    fs::path sweep_corpus;
    std::vector<fs::path> sweep_scenarios;
    std::vector<std::string> sweep_schedulers(std::begin(kSchedulerNames), std::end(kSchedulerNames));
    std::vector<std::uint64_t> sweep_seeds{1};
    std::string sweep_group;
    auto* sweep = app.add_subcommand("sweep", "run schedulers x scenarios x traces x seeds and tabulate");
    sweep->add_option("--corpus", sweep_corpus, "directory of trace files")->required();
    sweep->add_option("--scenario", sweep_scenarios, "scenario JSON file (repeatable)")->required();
    sweep->add_option("--scheduler", sweep_schedulers, "schedulers to compare (repeatable)")->capture_default_str();
    sweep->add_option("--seed", sweep_seeds, "seeds (repeatable)")->capture_default_str();
    sweep->add_option("--output", sweep_plan.output_dir, "output directory")->required();
    sweep->add_option("--jobs", sweep_plan.jobs, "parallel runs (0 = all processors)")->capture_default_str();
    sweep->add_option("--group", sweep_group, "trace-group label (default: corpus directory name)");
    add_run_params(sweep, sweep_plan.base, false);

    // tune
    TunePlan tune_plan;
    fs::path tune_corpus;
    fs::path tune_scenario;
    std::vector<double> tune_lows{0.4, 0.8, 1.2};
    std::vector<double> tune_highs{1.8, 2.3, 2.8};
    auto* tune = app.add_subcommand("tune", "grid-search L and H on the training split");
    tune->add_option("--corpus", tune_corpus, "directory of trace files")->required();
    tune->add_option("--scenario", tune_scenario, "scenario JSON file")->required();
    tune->add_option("--low", tune_lows, "candidate L values in Mbps")->capture_default_str();
    tune->add_option("--high", tune_highs, "candidate H values in Mbps")->capture_default_str();
    tune->add_option("--seed", tune_plan.seeds, "seeds (repeatable)")->capture_default_str();
    tune->add_option("--train-fraction", tune_plan.train_fraction)->capture_default_str();
    tune->add_option("--split-seed", tune_plan.split_seed)->capture_default_str();
    tune->add_option("--output", tune_plan.output_path, "grid results (JSON lines)");
    tune->add_option("--jobs", tune_plan.jobs)->capture_default_str();
    add_run_params(tune, tune_plan.base, false);

    // traces
    auto* traces = app.add_subcommand("traces", "trace utilities");
    traces->require_subcommand(1);

    fs::path parse_in, parse_out;
    auto* t_parse = traces->add_subcommand("parse", "parse a trace, print its stats, optionally convert it");
    t_parse->add_option("input", parse_in)->required();
    t_parse->add_option("--to", parse_out, "write converted trace (.csv or packet-opportunity)");

    fs::path filter_dir, filter_manifest;
    auto* t_filter = traces->add_subcommand("filter", "apply the corpus filter and write a manifest");
    t_filter->add_option("corpus", filter_dir)->required();
    t_filter->add_option("--manifest", filter_manifest, "manifest path (default stdout)");

    fs::path split_dir;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 7;
    auto* t_split = traces->add_subcommand("split", "seeded train/test split of the filtered corpus");
    t_split->add_option("corpus", split_dir)->required();
    t_split->add_option("--fraction", split_fraction)->capture_default_str();
    t_split->add_option("--seed", split_seed)->capture_default_str();

    std::string synth_kind = "constant";
    SyntheticParams synth;
    double synth_duration = 100.0;
    std::uint64_t synth_seed = 1;
    fs::path synth_out;
    auto* t_synth = traces->add_subcommand("synthesize", "write a synthetic trace");
    t_synth->add_option("--kind", synth_kind, "constant | square_wave | ramp")->capture_default_str();
    t_synth->add_option("--rate", synth.rate_mbps)->capture_default_str();
    t_synth->add_option("--low", synth.low_mbps)->capture_default_str();
    t_synth->add_option("--high", synth.high_mbps)->capture_default_str();
    t_synth->add_option("--period", synth.period_s)->capture_default_str();
    t_synth->add_option("--start", synth.start_mbps)->capture_default_str();
    t_synth->add_option("--end", synth.end_mbps)->capture_default_str();
    t_synth->add_option("--noise", synth.noise)->capture_default_str();
    t_synth->add_option("--duration", synth_duration)->capture_default_str();
    t_synth->add_option("--seed", synth_seed)->capture_default_str();
    t_synth->add_option("--output", synth_out)->required();

    std::size_t corpus_count = 20;
    double corpus_duration = 100.0;
    std::uint64_t corpus_seed = 2024;
    fs::path corpus_out;
    auto* t_corpus = traces->add_subcommand("synthetic-corpus", "write the bundled square-wave/ramp corpus");
    t_corpus->add_option("--count", corpus_count)->capture_default_str();
    t_corpus->add_option("--duration", corpus_duration)->capture_default_str();
    t_corpus->add_option("--seed", corpus_seed)->capture_default_str();
    t_corpus->add_option("--output-dir", corpus_out)->required();

    std::vector<fs::path> concat_in;
    fs::path concat_out;
    auto* t_concat = traces->add_subcommand("concat", "concatenate traces back to back");
    t_concat->add_option("inputs", concat_in)->required();
    t_concat->add_option("--output", concat_out)->required();

    // report
    fs::path report_dir;
    auto* report = app.add_subcommand("report", "rebuild the comparison table from per-run records");
    report->add_option("sweep_dir", report_dir, "sweep output directory (containing runs/)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) {
            run_cfg.params.mid_branch = literal_mid ? MidBranch::literal : MidBranch::intended;
            run_cfg.params.record_log = !run_cfg.event_log_path.empty();
            const RunResult r = run_single(run_cfg);
            std::cerr << "delivery_ratio=" << r.report.delivery_ratio << " utilization=" << r.report.utilization
                      << " qoe=" << r.report.qoe << '\n';
        } else if (*sweep) {
            sweep_plan.schedulers = sweep_schedulers;
            sweep_plan.seeds = sweep_seeds;
            sweep_plan.trace_group =
                sweep_group.empty() ? fs::absolute(sweep_corpus).lexically_normal().filename().string() : sweep_group;
            if (sweep_plan.trace_group.empty()) sweep_plan.trace_group = "corpus";
            SweepStats stats;
            const auto table = run_sweep_from_corpus(sweep_corpus, sweep_scenarios, sweep_plan, {}, &stats);
            std::cerr << "sweep: executed " << stats.executed << ", reused " << stats.reused << " records\n";
            std::cout << render_table(table);
        } else if (*tune) {
            tune_plan.grid = make_grid(tune_lows, tune_highs);
            tune_plan.traces = filter_corpus(load_corpus(tune_corpus));
            if (tune_plan.traces.empty()) throw ConfigError("no trace in the corpus passes the filter");
            tune_plan.scenario = load_scenario(tune_scenario);
            const TuneResult r = tune_thresholds(tune_plan);
            for (const auto& c : r.cells) {
                std::cout << "L=" << c.low_mbps << " H=" << c.high_mbps << " mean_qoe=" << c.mean_qoe << " runs=" << c.runs
                          << '\n';
            }
            std::cout << "best L=" << r.best.low_mbps << " H=" << r.best.high_mbps << " mean_qoe=" << r.best.mean_qoe
                      << '\n';
        } else if (*traces) {
            if (*t_parse) {
                const LinkTrace t = load_trace(parse_in);
                print_trace_summary(t);
                if (!parse_out.empty()) save_trace(parse_out, t);
            } else if (*t_filter) {
                std::ofstream file;
                std::ostream* out = &std::cout;
                if (!filter_manifest.empty()) {
                    file.open(filter_manifest);
                    if (!file) throw ConfigError("cannot write " + filter_manifest.string());
                    out = &file;
                }
                for (const auto& path : list_trace_files(filter_dir)) {
                    const LinkTrace t = load_trace(path);
                    nlohmann::ordered_json j;
                    j["path"] = path.string();
                    j["mean_mbps"] = bytes_per_s_to_mbps(t.mean_bps());
                    j["min_mbps"] = bytes_per_s_to_mbps(t.min_bps());
                    j["kept"] = passes_filter(t);
                    *out << j.dump() << '\n';
                }
            } else if (*t_split) {
                const auto split = split_corpus(filter_corpus(load_corpus(split_dir)), split_fraction, split_seed);
                for (const auto& t : split.train) std::cout << "train " << t.source_tag << '\n';
                for (const auto& t : split.test) std::cout << "test " << t.source_tag << '\n';
            } else if (*t_synth) {
                save_trace(synth_out, synthesize_trace(parse_synthetic_kind(synth_kind), synth, synth_duration, synth_seed));
            } else if (*t_corpus) {
                fs::create_directories(corpus_out);
                for (const auto& t : synthetic_corpus(corpus_count, corpus_duration, corpus_seed)) {
                    save_trace(corpus_out / (t.source_tag + ".csv"), t);
                }
            } else if (*t_concat) {
                std::vector<LinkTrace> parts;
                for (const auto& p : concat_in) parts.push_back(load_trace(p));
                save_trace(concat_out, concatenate_traces(parts, concat_out.filename().string()));
            }
        } else if (*report) {
            const auto table = table_from_records(report_dir / "runs");
            write_table_files(report_dir, table);
            std::cout << render_table(table);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
