#include "dpsched/runner.hpp"

#include "dpsched/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace dpsched {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

void RunParams::validate() const {
    make_scheduler(scheduler, ScenarioConfig{"probe", {MediaElement{0, 0, 1.0, 1, 1.0, 0.0}}});
    if (!(rtt_ms >= 0.0)) throw ConfigError("rtt_ms must be >= 0");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0)) throw ConfigError("loss_rate must lie in [0, 1)");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(duration_s > 0.0)) throw ConfigError("duration_s must be > 0");
    RegimeThresholds::from_mbps(low_mbps, high_mbps);
}

RunResult run_simulation(const ScenarioConfig& scenario, const LinkTrace& trace, const RunParams& params) {
    params.validate();
    trace.validate();
    ScenarioConfig effective = scenario;
    if (params.offered_load > 0.0) {
        effective = scale_to_offered_rate(scenario, params.offered_load * trace.mean_bps());
    }
    auto scheduler = make_scheduler(params.scheduler, effective, SchedulerOptions{params.mid_branch});

    SimulationConfig sim_config;
    sim_config.link.rtt_s = params.rtt_ms / 1000.0;
    sim_config.link.loss_rate = params.loss_rate;
    sim_config.link.seed = params.seed;
    sim_config.thresholds = RegimeThresholds::from_mbps(params.low_mbps, params.high_mbps);
    sim_config.record_log = params.record_log;

    Simulation sim(trace, generate_blocks(effective, params.duration_s, params.seed), *scheduler, sim_config);
    sim.run();
    if (!sim.queue().empty() || !sim.ledger().empty()) {
        throw InvariantViolation("simulation drained with blocks still queued or packets inflight");
    }

    RunResult result;
    result.offered_bytes = sim.capacity().bytes_until(params.duration_s);
    result.report = build_report(sim.blocks(), result.offered_bytes, params.duration_s, params.alpha);
    result.blocks = sim.blocks();
    result.log = sim.log();
    result.transmissions = sim.transmissions();
    result.losses = sim.losses_drawn();

    ReportMetadata& m = result.meta;
    m.scheduler = params.scheduler;
    m.approximation = scheduler->is_approximation();
    m.mid_branch = params.mid_branch == MidBranch::literal ? "literal" : "intended";
    m.scenario = scenario.name;
    m.trace = trace.source_tag;
    m.seed = params.seed;
    m.rtt_ms = params.rtt_ms;
    m.loss_rate = params.loss_rate;
    m.low_mbps = params.low_mbps;
    m.high_mbps = params.high_mbps;
    m.duration_s = params.duration_s;
    m.offered_load = params.offered_load;
    return result;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

}  // namespace

RunResult run_single(const RunConfig& config) {
    if (!fs::exists(config.scenario_path)) throw ConfigError("scenario file " + config.scenario_path.string() + " not found");
    if (!fs::exists(config.trace_path)) throw ConfigError("trace file " + config.trace_path.string() + " not found");
    const ScenarioConfig scenario = load_scenario(config.scenario_path);
    const LinkTrace trace = load_trace(config.trace_path);

    RunParams params = config.params;
    params.record_log = params.record_log || !config.event_log_path.empty();
    RunResult result = run_simulation(scenario, trace, params);

    const std::string report = report_to_jsonl(result.report, result.meta);
    if (config.output_path.empty()) {
        std::cout << report;
    } else {
        write_text(config.output_path, report);
    }
    if (!config.event_log_path.empty()) {
        std::ostringstream log;
        write_event_log(log, result.log, result.blocks);
        write_text(config.event_log_path, log.str());
    }
    return result;
}

void write_event_log(std::ostream& out, std::span<const LogRecord> log, std::span<const Block> blocks) {
    for (const LogRecord& r : log) {
        ordered_json j;
        j["t"] = r.time;
        j["kind"] = to_string(r.kind);
        if (r.slot != kNoSlot) {
            const Block& b = blocks[r.slot];
            j["element"] = b.id.element;
            j["index"] = b.id.index;
        }
        switch (r.kind) {
            case LogKind::decision:
                j["reason"] = to_string(r.reason);
                j["regime"] = to_string(r.regime);
                j["smoothed_bps"] = r.smoothed_bps;
                break;
            case LogKind::packet_sent:
                j["seq"] = r.sequence;
                j["bytes"] = r.bytes;
                j["retx"] = r.retransmission;
                j["enqueue_t"] = r.enqueue_time;
                j["instantaneous_bps"] = r.instantaneous_bps;
                break;
            case LogKind::packet_delivered:
                j["seq"] = r.sequence;
                j["bytes"] = r.bytes;
                j["retx"] = r.retransmission;
                break;
            case LogKind::ack:
            case LogKind::loss_signal:
                j["seq"] = r.sequence;
                j["smoothed_bps"] = r.smoothed_bps;
                j["regime"] = to_string(r.regime);
                break;
            case LogKind::block_arrival:
                j["bytes"] = r.bytes;
                break;
            case LogKind::block_expired:
            case LogKind::block_complete:
                break;
        }
        out << j.dump() << '\n';
    }
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n || failed.load()) return;
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed.store(true);
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

std::string record_file_name(const std::string& scheduler, const std::string& scenario, const std::string& trace,
                             std::uint64_t seed) {
    auto clean = [](std::string s) {
        for (char& c : s) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                            c == '_' || c == '.';
            if (!ok) c = '-';
        }
        return s;
    };
    return clean(scheduler) + "__" + clean(scenario) + "__" + clean(trace) + "__s" + std::to_string(seed) + ".json";
}

namespace {

bool record_is_valid(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return false;
    try {
        const json j = json::parse(in);
        return j.contains("qoe") && j.contains("scheduler") && j.contains("trace_group");
    } catch (const json::exception&) {
        return false;
    }
}

int scheduler_rank(const std::string& name) {
    for (std::size_t i = 0; i < std::size(kSchedulerNames); ++i) {
        if (kSchedulerNames[i] == name) return static_cast<int>(i);
    }
    return static_cast<int>(std::size(kSchedulerNames));
}

}  // namespace

ComparisonTable run_sweep(const SweepPlan& plan, SweepStats* stats) {
    if (plan.traces.empty()) throw ConfigError("sweep has no traces");
    if (plan.scenarios.empty()) throw ConfigError("sweep has no scenarios");
    if (plan.schedulers.empty()) throw ConfigError("sweep has no schedulers");
    if (plan.seeds.empty()) throw ConfigError("sweep has no seeds");
    if (plan.output_dir.empty()) throw ConfigError("sweep needs an output directory");
    for (const auto& s : plan.schedulers) make_scheduler(s, plan.scenarios.front().config);

    const fs::path runs_dir = plan.output_dir / "runs";
    fs::create_directories(runs_dir);

    struct Job {
        const std::string* scheduler;
        const NamedScenario* scenario;
        const LinkTrace* trace;
        std::uint64_t seed;
        fs::path path;
    };
    std::vector<Job> pending;
    std::size_t reused = 0;
    for (const auto& scheduler : plan.schedulers) {
        for (const auto& scenario : plan.scenarios) {
            for (const auto& trace : plan.traces) {
                for (std::uint64_t seed : plan.seeds) {
                    fs::path path = runs_dir / record_file_name(scheduler, scenario.name, trace.source_tag, seed);
                    if (record_is_valid(path)) {
                        ++reused;
                        continue;
                    }
                    pending.push_back({&scheduler, &scenario, &trace, seed, std::move(path)});
                }
            }
        }
    }

    std::mutex progress_mutex;
    std::size_t done = 0;
    parallel_for(pending.size(), plan.jobs, [&](std::size_t i) {
        const Job& job = pending[i];
        RunParams params = plan.base;
        params.scheduler = *job.scheduler;
        params.seed = job.seed;
        params.record_log = false;
        const RunResult result = run_simulation(job.scenario->config, *job.trace, params);
        ReportMetadata meta = result.meta;
        meta.scenario = job.scenario->name;
        ordered_json record = ordered_json::parse(summary_to_json(result.report, meta));
        record["trace_group"] = plan.trace_group;
        // Write-then-rename so an interrupted sweep never leaves half a record.
        const fs::path tmp = job.path.string() + ".tmp";
        write_text(tmp, record.dump() + "\n");
        fs::rename(tmp, job.path);
        std::lock_guard lock(progress_mutex);
        ++done;
        if (done % 50 == 0 || done == pending.size()) {
            std::cerr << "sweep: " << done << "/" << pending.size() << " runs\n";
        }
    });

    if (stats != nullptr) *stats = SweepStats{pending.size(), reused};
    ComparisonTable table = table_from_records(runs_dir);
    write_table_files(plan.output_dir, table);
    return table;
}

ComparisonTable run_sweep_from_corpus(const fs::path& corpus_dir, const std::vector<fs::path>& scenario_paths,
                                      SweepPlan plan, const CorpusFilter& filter, SweepStats* stats) {
    const auto all = load_corpus(corpus_dir);
    plan.traces = filter_corpus(all, filter);
    if (plan.traces.empty()) {
        std::ostringstream msg;
        msg << "no trace in " << corpus_dir.string() << " passes the corpus filter (mean < " << filter.max_mean_mbps
            << " Mbps and min > " << filter.min_floor_mbps << " Mbps; " << all.size() << " traces examined)";
        throw ConfigError(msg.str());
    }
    plan.scenarios.clear();
    for (const auto& p : scenario_paths) {
        ScenarioConfig s = load_scenario(p);
        plan.scenarios.push_back({s.name, std::move(s)});
    }
    return run_sweep(plan, stats);
}

ComparisonTable table_from_records(const fs::path& runs_dir) {
    if (!fs::is_directory(runs_dir)) throw ConfigError("no run records under " + runs_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    using Key = std::tuple<std::string, std::string, std::string>;  // scenario, group, scheduler
    struct Sum {
        std::size_t runs = 0;
        double delivery = 0.0, util = 0.0, eff = 0.0, qoe = 0.0;
    };
    std::map<Key, Sum> sums;
    for (const auto& path : files) {
        std::ifstream in(path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("corrupt run record " + path.string() + ": " + e.what());
        }
        Sum& s = sums[Key{j.at("scenario").get<std::string>(), j.at("trace_group").get<std::string>(),
                          j.at("scheduler").get<std::string>()}];
        ++s.runs;
        s.delivery += j.at("delivery_ratio").get<double>();
        s.util += j.at("utilization").get<double>();
        s.eff += j.at("effective_utilization").get<double>();
        s.qoe += j.at("qoe").get<double>();
    }

    ComparisonTable table;
    for (const auto& [key, s] : sums) {
        ComparisonRow row;
        std::tie(row.scenario, row.trace_group, row.scheduler) = key;
        const auto n = static_cast<double>(s.runs);
        row.runs = s.runs;
        row.delivery_ratio = s.delivery / n;
        row.utilization = s.util / n;
        row.effective_utilization = s.eff / n;
        row.qoe = s.qoe / n;
        table.rows.push_back(row);
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        return std::tuple(a.scenario, a.trace_group, scheduler_rank(a.scheduler), a.scheduler) <
               std::tuple(b.scenario, b.trace_group, scheduler_rank(b.scheduler), b.scheduler);
    });

    // Gains within each (scenario, group).
    for (auto& row : table.rows) {
        const ComparisonRow* proposed = nullptr;
        const ComparisonRow* strongest = nullptr;
        for (const auto& other : table.rows) {
            if (other.scenario != row.scenario || other.trace_group != row.trace_group) continue;
            if (other.scheduler == "proposed") {
                proposed = &other;
            } else if (strongest == nullptr || other.qoe > strongest->qoe) {
                strongest = &other;
            }
        }
        if (proposed == nullptr) continue;
        const ComparisonRow* base = row.scheduler == "proposed" ? strongest : &row;
        if (base != nullptr && base->qoe > 0.0) row.qoe_gain_pct = (proposed->qoe - base->qoe) / base->qoe * 100.0;
    }
    return table;
}

std::string render_table(const ComparisonTable& table) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-14s %-12s %5s %9s %9s %9s %9s %10s\n", "scenario", "trace_group",
                  "scheduler", "runs", "delivery", "util", "eff_util", "qoe", "gain_%");
    out << line;
    for (const auto& r : table.rows) {
        char gain[32] = "-";
        if (r.qoe_gain_pct) std::snprintf(gain, sizeof gain, "%+.2f", *r.qoe_gain_pct);
        std::snprintf(line, sizeof line, "%-12s %-14s %-12s %5zu %9.4f %9.4f %9.4f %9.4f %10s\n", r.scenario.c_str(),
                      r.trace_group.c_str(), r.scheduler.c_str(), r.runs, r.delivery_ratio, r.utilization,
                      r.effective_utilization, r.qoe, gain);
        out << line;
    }
    return out.str();
}

std::string table_to_jsonl(const ComparisonTable& table) {
    std::string out;
    for (const auto& r : table.rows) {
        ordered_json j;
        j["scheduler"] = r.scheduler;
        j["scenario"] = r.scenario;
        j["trace_group"] = r.trace_group;
        j["runs"] = r.runs;
        j["delivery_ratio"] = r.delivery_ratio;
        j["utilization"] = r.utilization;
        j["effective_utilization"] = r.effective_utilization;
        j["qoe"] = r.qoe;
        j["qoe_gain_vs_baseline_pct"] = r.qoe_gain_pct ? ordered_json(*r.qoe_gain_pct) : ordered_json(nullptr);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_table_files(const fs::path& output_dir, const ComparisonTable& table) {
    write_text(output_dir / "table.txt", render_table(table));
    write_text(output_dir / "table.jsonl", table_to_jsonl(table));
}

TuneCell select_best_cell(std::span<const TuneCell> cells) {
    if (cells.empty()) throw ConfigError("threshold grid is empty");
    const TuneCell* best = &cells.front();
    for (const auto& c : cells) {
        if (c.mean_qoe > best->mean_qoe) best = &c;
    }
    return *best;
}

std::vector<std::pair<double, double>> make_grid(std::span<const double> lows, std::span<const double> highs) {
    std::vector<std::pair<double, double>> grid;
    for (double l : lows) {
        for (double h : highs) grid.emplace_back(l, h);
    }
    return grid;
}

TuneResult tune_thresholds(const TunePlan& plan) {
    if (plan.grid.empty()) throw ConfigError("threshold grid is empty");
    for (const auto& [l, h] : plan.grid) RegimeThresholds::from_mbps(l, h);
    if (plan.seeds.empty()) throw ConfigError("tuning needs at least one seed");

    const CorpusSplit split = split_corpus(plan.traces, plan.train_fraction, plan.split_seed);
    if (split.train.empty()) throw ConfigError("training split is empty; add traces or raise the train fraction");

    const std::size_t per_cell = split.train.size() * plan.seeds.size();
    std::vector<double> qoe(plan.grid.size() * per_cell, 0.0);
    parallel_for(qoe.size(), plan.jobs, [&](std::size_t i) {
        const std::size_t cell = i / per_cell;
        const std::size_t rest = i % per_cell;
        RunParams params = plan.base;
        params.scheduler = "proposed";
        params.low_mbps = plan.grid[cell].first;
        params.high_mbps = plan.grid[cell].second;
        params.seed = plan.seeds[rest % plan.seeds.size()];
        params.record_log = false;
        qoe[i] = run_simulation(plan.scenario, split.train[rest / plan.seeds.size()], params).report.qoe;
    });

    TuneResult result;
    result.train_traces = split.train.size();
    result.test_traces = split.test.size();
    for (std::size_t cell = 0; cell < plan.grid.size(); ++cell) {
        TuneCell c;
        c.low_mbps = plan.grid[cell].first;
        c.high_mbps = plan.grid[cell].second;
        c.runs = per_cell;
        double sum = 0.0;
        for (std::size_t k = 0; k < per_cell; ++k) sum += qoe[cell * per_cell + k];
        c.mean_qoe = sum / static_cast<double>(per_cell);
        result.cells.push_back(c);
    }
    result.best = select_best_cell(result.cells);

    if (!plan.output_path.empty()) {
        std::string text;
        for (const auto& c : result.cells) {
            ordered_json j;
            j["low_mbps"] = c.low_mbps;
            j["high_mbps"] = c.high_mbps;
            j["mean_qoe"] = c.mean_qoe;
            j["runs"] = c.runs;
            j["best"] = c.low_mbps == result.best.low_mbps && c.high_mbps == result.best.high_mbps;
            text += j.dump();
            text += '\n';
        }
        write_text(plan.output_path, text);
    }
    return result;
}

}  // namespace dpsched
