#include "dpsched/metrics.hpp"

#include "dpsched/errors.hpp"

#include <json.hpp>

#include <algorithm>

namespace dpsched {

using nlohmann::ordered_json;

int delivery_indicator(double arrival, std::optional<double> completion, double deadline) {
    if (!completion) return 0;
    return *completion - arrival <= deadline ? 1 : 0;
}

double channel_utilization(double received_bytes, double offered_bytes) {
    if (!(offered_bytes > 0.0)) throw ConfigError("offered capacity must be > 0");
    return std::clamp(received_bytes / offered_bytes, 0.0, 1.0);
}

double effective_utilization(double on_time_bytes, double offered_bytes) {
    return channel_utilization(on_time_bytes, offered_bytes);
}

double session_qoe(double delivery_ratio, double utilization, double alpha) {
    return delivery_ratio + alpha * utilization;
}

QoEReport build_report(std::span<const Block> blocks, double offered_bytes, double window_s, double alpha) {
    QoEReport report;
    report.alpha = alpha;
    report.window_s = window_s;
    report.offered_bytes = offered_bytes;

    int on_time_blocks = 0;
    for (const Block& b : blocks) {
        BlockOutcome o;
        o.id = b.id;
        o.arrival = b.arrival;
        o.completion = b.completion;
        o.deadline = b.deadline;
        o.priority = b.priority;
        o.total_bytes = b.total_bytes;
        o.expired = b.expired;
        o.on_time = delivery_indicator(b.arrival, b.completion, b.deadline);
        on_time_blocks += o.on_time;

        for (const Packet& p : b.packets) {
            if (!p.received_time || *p.received_time > window_s) continue;
            report.received_bytes += p.size;
            if (p.retransmissions > 0) {
                report.retransmitted_bytes += p.size;
            } else if (o.on_time) {
                report.on_time_bytes += p.size;
            }
        }
        report.per_block.push_back(o);
    }

    report.delivery_ratio =
        blocks.empty() ? 0.0 : static_cast<double>(on_time_blocks) / static_cast<double>(blocks.size());
    report.utilization = channel_utilization(static_cast<double>(report.received_bytes), offered_bytes);
    report.effective_utilization = effective_utilization(static_cast<double>(report.on_time_bytes), offered_bytes);
    report.qoe = session_qoe(report.delivery_ratio, report.utilization, alpha);
    return report;
}

namespace {

ordered_json summary_json(const QoEReport& report, const ReportMetadata& meta) {
    ordered_json s;
    s["type"] = "summary";
    s["scheduler"] = meta.scheduler;
    s["approximation"] = meta.approximation;
    s["mid_branch"] = meta.mid_branch;
    s["scenario"] = meta.scenario;
    s["trace"] = meta.trace;
    s["seed"] = meta.seed;
    s["rtt_ms"] = meta.rtt_ms;
    s["loss_rate"] = meta.loss_rate;
    s["loss_model"] = meta.loss_model;
    s["low_mbps"] = meta.low_mbps;
    s["high_mbps"] = meta.high_mbps;
    s["duration_s"] = meta.duration_s;
    s["offered_load"] = meta.offered_load;
    s["alpha"] = report.alpha;
    s["blocks"] = report.per_block.size();
    s["delivery_ratio"] = report.delivery_ratio;
    s["utilization"] = report.utilization;
    s["effective_utilization"] = report.effective_utilization;
    s["qoe"] = report.qoe;
    s["received_bytes"] = report.received_bytes;
    s["on_time_bytes"] = report.on_time_bytes;
    s["retransmitted_bytes"] = report.retransmitted_bytes;
    s["offered_bytes"] = report.offered_bytes;
    return s;
}

}  // namespace

std::string summary_to_json(const QoEReport& report, const ReportMetadata& meta) {
    return summary_json(report, meta).dump();
}

std::string report_to_jsonl(const QoEReport& report, const ReportMetadata& meta) {
    std::string out;
    for (const auto& o : report.per_block) {
        ordered_json b;
        b["type"] = "block";
        b["element"] = o.id.element;
        b["index"] = o.id.index;
        b["arrival"] = o.arrival;
        b["completion"] = o.completion ? ordered_json(*o.completion) : ordered_json(nullptr);
        b["deadline"] = o.deadline;
        b["priority"] = o.priority;
        b["bytes"] = o.total_bytes;
        b["expired"] = o.expired;
        b["on_time"] = o.on_time;
        out += b.dump();
        out += '\n';
    }
    out += summary_json(report, meta).dump();
    out += '\n';
    return out;
}

}  // namespace dpsched
