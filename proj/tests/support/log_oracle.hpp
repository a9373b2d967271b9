#pragma once

// Recomputes session metrics and safety properties from the raw event log,
// without going through dpsched::build_report.

#include "dpsched/core_model.hpp"
#include "dpsched/link_sim.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace oracle {

struct LogMetrics {
    std::size_t blocks = 0;
    std::size_t on_time = 0;
    std::int64_t received_bytes = 0;
    std::int64_t first_copy_on_time_bytes = 0;
    std::int64_t retransmitted_bytes = 0;
    double delivery_ratio = 0.0;
    double utilization = 0.0;
    double effective_utilization = 0.0;
};

// `deadlines` is indexed by block slot (static per-block configuration).
inline LogMetrics metrics_from_log(std::span<const dpsched::LogRecord> log, std::span<const double> deadlines,
                                   double offered_bytes, double window_s) {
    using dpsched::LogKind;
    std::map<std::uint32_t, double> arrival;
    std::map<std::uint32_t, double> complete;
    for (const auto& r : log) {
        if (r.kind == LogKind::block_arrival) arrival[r.slot] = r.time;
        if (r.kind == LogKind::block_complete) complete[r.slot] = r.time;
    }
    LogMetrics m;
    m.blocks = arrival.size();
    std::map<std::uint32_t, bool> on_time;
    for (const auto& [slot, e] : arrival) {
        auto it = complete.find(slot);
        const bool ok = it != complete.end() && it->second - e <= deadlines[slot];
        on_time[slot] = ok;
        m.on_time += ok ? 1 : 0;
    }
    for (const auto& r : log) {
        if (r.kind != LogKind::packet_delivered || r.time > window_s) continue;
        m.received_bytes += r.bytes;
        if (r.retransmission > 0) {
            m.retransmitted_bytes += r.bytes;
        } else if (on_time[r.slot]) {
            m.first_copy_on_time_bytes += r.bytes;
        }
    }
    m.delivery_ratio = m.blocks == 0 ? 0.0 : static_cast<double>(m.on_time) / static_cast<double>(m.blocks);
    m.utilization = static_cast<double>(m.received_bytes) / offered_bytes;
    m.effective_utilization = static_cast<double>(m.first_copy_on_time_bytes) / offered_bytes;
    return m;
}

// Packets whose transmission began after their block's deadline had passed,
// or after the block was logged as expired.
inline std::size_t expired_transmissions(std::span<const dpsched::LogRecord> log,
                                         std::span<const double> arrivals, std::span<const double> deadlines) {
    using dpsched::LogKind;
    std::map<std::uint32_t, double> expired_at;
    std::size_t violations = 0;
    for (const auto& r : log) {
        if (r.kind == LogKind::block_expired) expired_at.emplace(r.slot, r.time);
        if (r.kind != LogKind::packet_sent) continue;
        if (r.enqueue_time - arrivals[r.slot] > deadlines[r.slot]) ++violations;
        auto it = expired_at.find(r.slot);
        if (it != expired_at.end() && r.enqueue_time >= it->second) ++violations;
    }
    return violations;
}

}  // namespace oracle
