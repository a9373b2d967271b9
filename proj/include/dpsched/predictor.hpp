#pragma once

#include "dpsched/core_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dpsched {

// Ordered Low < Mid < High.
enum class Regime : std::uint8_t { low = 0, mid = 1, high = 2 };

std::string_view to_string(Regime regime);

struct RegimeThresholds {
    double low_bps = 0.0;   // L, bytes/s
    double high_bps = 0.0;  // H, bytes/s

    static RegimeThresholds from_mbps(double low_mbps, double high_mbps);
    // Throws ConfigError unless 0 < L < H.
    void validate() const;
};

struct BandwidthEstimate {
    double instantaneous_bps = 0.0;
    double smoothed_bps = 0.0;
    double sample_time = 0.0;
    Regime regime = Regime::mid;
};

struct InflightEntry {
    std::uint64_t packet_key = 0;
    Bytes size = 0;
    double send_time = 0.0;
};

// Packets sent and not yet acknowledged or reported lost, in send order.
class InflightLedger {
public:
    void add(const InflightEntry& entry);
    std::optional<InflightEntry> remove(std::uint64_t packet_key);
    bool contains(std::uint64_t packet_key) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const InflightEntry> entries() const noexcept { return entries_; }

    // Bytes of entries whose send time lies in [from, to].
    Bytes bytes_sent_between(double from, double to) const;

private:
    std::vector<InflightEntry> entries_;
};

// Packet size over its sending latency (time from entering the selection
// queue to leaving the sender). Throws DegenerateIntervalError when
// send_time <= enqueue_time.
double instantaneous_throughput(Bytes packet_size, double enqueue_time, double send_time);

// Inflight moving average at the response of packet Y: bytes of every ledger
// entry sent in [Y_s, Y_r] (Y itself included, it is still in the ledger
// when its response arrives) over Y_r - Y_s. Empty ledger gives 0. Throws
// DegenerateIntervalError when Y_r <= Y_s.
double smoothed_throughput(const InflightLedger& ledger, double ys, double yr);

// Low iff thr < L, High iff thr > H, Mid otherwise (both boundaries are Mid).
Regime classify_regime(double smoothed_bps, const RegimeThresholds& thresholds);

// Tracks the latest estimates for one simulation run. Before the first
// response the smoothed value is L.
class BandwidthPredictor {
public:
    explicit BandwidthPredictor(RegimeThresholds thresholds);

    // Called when a packet leaves the sender. Degenerate latency keeps the
    // previous instantaneous value.
    void on_packet_sent(Bytes size, double enqueue_time, double send_time);

    // Called on ACK or loss signal for packet Y, before Y leaves the ledger.
    void on_response(const InflightLedger& ledger, double ys, double yr);

    const BandwidthEstimate& estimate() const noexcept { return estimate_; }
    Regime regime() const noexcept { return estimate_.regime; }
    const RegimeThresholds& thresholds() const noexcept { return thresholds_; }

private:
    RegimeThresholds thresholds_;
    BandwidthEstimate estimate_;
};

}  // namespace dpsched
