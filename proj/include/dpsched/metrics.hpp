#pragma once

#include "dpsched/core_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpsched {

inline constexpr double kDefaultAlpha = 0.85;

// 1 iff the block was fully received and F - E <= D.
int delivery_indicator(double arrival, std::optional<double> completion, double deadline);

// received / offered, clamped to [0, 1]. Throws ConfigError when offered <= 0.
double channel_utilization(double received_bytes, double offered_bytes);

// Same ratio with only on-time blocks' first-copy bytes in the numerator.
double effective_utilization(double on_time_bytes, double offered_bytes);

double session_qoe(double delivery_ratio, double utilization, double alpha);

struct BlockOutcome {
    BlockId id;
    double arrival = 0.0;
    std::optional<double> completion;
    double deadline = 0.0;
    int priority = 0;
    Bytes total_bytes = 0;
    bool expired = false;
    int on_time = 0;  // R
};

struct QoEReport {
    std::vector<BlockOutcome> per_block;
    double delivery_ratio = 0.0;
    double utilization = 0.0;
    double effective_utilization = 0.0;
    double qoe = 0.0;
    double alpha = kDefaultAlpha;

    // Accounting window [0, window_s] for the utilization terms.
    double window_s = 0.0;
    double offered_bytes = 0.0;
    Bytes received_bytes = 0;
    Bytes on_time_bytes = 0;
    Bytes retransmitted_bytes = 0;
};

// Session aggregation: delivery ratio over every generated block (expired
// ones count as R = 0); utilization counts bytes the client received inside
// the window, retransmitted copies included; effective utilization keeps
// only first copies belonging to on-time blocks.
QoEReport build_report(std::span<const Block> blocks, double offered_bytes, double window_s, double alpha);

struct ReportMetadata {
    std::string scheduler;
    bool approximation = false;
    std::string mid_branch = "intended";
    std::string scenario;
    std::string trace;
    std::uint64_t seed = 0;
    double rtt_ms = 0.0;
    double loss_rate = 0.0;
    double low_mbps = 0.0;
    double high_mbps = 0.0;
    double duration_s = 0.0;
    double offered_load = 0.0;
    std::string loss_model = "nack_at_rtt";
};

// One JSON object per block followed by a summary object; fixed key order.
std::string report_to_jsonl(const QoEReport& report, const ReportMetadata& meta);
// The summary object alone, without a trailing newline.
std::string summary_to_json(const QoEReport& report, const ReportMetadata& meta);

}  // namespace dpsched
