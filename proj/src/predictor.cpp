#include "dpsched/predictor.hpp"

#include "dpsched/errors.hpp"

#include <algorithm>

namespace dpsched {

std::string_view to_string(Regime regime) {
    switch (regime) {
        case Regime::low: return "low";
        case Regime::mid: return "mid";
        case Regime::high: return "high";
    }
    return "unknown";
}

RegimeThresholds RegimeThresholds::from_mbps(double low_mbps, double high_mbps) {
    RegimeThresholds t{mbps_to_bytes_per_s(low_mbps), mbps_to_bytes_per_s(high_mbps)};
    t.validate();
    return t;
}

void RegimeThresholds::validate() const {
    if (!(low_bps > 0.0 && low_bps < high_bps)) {
        throw ConfigError("regime thresholds must satisfy 0 < L < H");
    }
}

void InflightLedger::add(const InflightEntry& entry) {
    if (contains(entry.packet_key)) {
        throw DuplicateEntryError("packet already inflight");
    }
    entries_.push_back(entry);
}

std::optional<InflightEntry> InflightLedger::remove(std::uint64_t packet_key) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const InflightEntry& e) { return e.packet_key == packet_key; });
    if (it == entries_.end()) return std::nullopt;
    InflightEntry out = *it;
    entries_.erase(it);
    return out;
}

bool InflightLedger::contains(std::uint64_t packet_key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const InflightEntry& e) { return e.packet_key == packet_key; });
}

Bytes InflightLedger::bytes_sent_between(double from, double to) const {
    Bytes sum = 0;
    for (const auto& e : entries_) {
        if (e.send_time >= from && e.send_time <= to) sum += e.size;
    }
    return sum;
}

double instantaneous_throughput(Bytes packet_size, double enqueue_time, double send_time) {
    if (!(send_time > enqueue_time)) {
        throw DegenerateIntervalError("sending latency must be positive");
    }
    if (packet_size < 0) throw DegenerateIntervalError("negative packet size");
    return static_cast<double>(packet_size) / (send_time - enqueue_time);
}

double smoothed_throughput(const InflightLedger& ledger, double ys, double yr) {
    if (!(yr > ys)) throw DegenerateIntervalError("response must follow send");
    if (ledger.empty()) return 0.0;
    return static_cast<double>(ledger.bytes_sent_between(ys, yr)) / (yr - ys);
}

Regime classify_regime(double smoothed_bps, const RegimeThresholds& thresholds) {
    if (smoothed_bps < thresholds.low_bps) return Regime::low;
    if (smoothed_bps > thresholds.high_bps) return Regime::high;
    return Regime::mid;
}

BandwidthPredictor::BandwidthPredictor(RegimeThresholds thresholds) : thresholds_(thresholds) {
    thresholds_.validate();
    estimate_.instantaneous_bps = thresholds_.low_bps;
    estimate_.smoothed_bps = thresholds_.low_bps;
    estimate_.regime = classify_regime(estimate_.smoothed_bps, thresholds_);
}

void BandwidthPredictor::on_packet_sent(Bytes size, double enqueue_time, double send_time) {
    try {
        estimate_.instantaneous_bps = instantaneous_throughput(size, enqueue_time, send_time);
    } catch (const DegenerateIntervalError&) {
        // keep the last valid value
    }
}

void BandwidthPredictor::on_response(const InflightLedger& ledger, double ys, double yr) {
    try {
        estimate_.smoothed_bps = smoothed_throughput(ledger, ys, yr);
        estimate_.sample_time = yr;
        estimate_.regime = classify_regime(estimate_.smoothed_bps, thresholds_);
    } catch (const DegenerateIntervalError&) {
    }
}

}  // namespace dpsched
