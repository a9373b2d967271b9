#pragma once

#include "dpsched/core_model.hpp"
#include "dpsched/predictor.hpp"
#include "dpsched/scheduler.hpp"
#include "dpsched/trace_io.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <string_view>
#include <vector>

namespace dpsched {

// Capacity at `time`, looping the trace when time runs past its end.
double capacity_at(const LinkTrace& trace, double time);

// Cumulative view of a looped trace, used to serialise packets onto the link.
class CapacityProfile {
public:
    // Throws ConfigError on an empty trace or one that never offers capacity.
    explicit CapacityProfile(const LinkTrace& trace);

    double capacity_at(double time) const;
    // Bytes the link can carry over [0, time].
    double bytes_until(double time) const;
    double bytes_between(double from, double to) const { return bytes_until(to) - bytes_until(from); }
    // Earliest time at which `bytes` started at `start` have left the link.
    double finish_time(double start, double bytes) const;

    double loop_duration() const noexcept { return duration_; }
    double max_capacity() const noexcept { return max_capacity_; }

private:
    std::vector<double> bounds_;      // segment starts, bounds_[0] == 0
    std::vector<double> capacities_;  // per segment
    std::vector<double> cumulative_;  // bytes at each segment start, plus loop total
    double duration_ = 0.0;
    double period_bytes_ = 0.0;
    double max_capacity_ = 0.0;
};

// Same-time events resolve in this order.
enum class EventKind : std::uint8_t {
    send_opportunity,
    packet_delivered,
    ack_at_sender,
    loss_signal_at_sender,
    block_arrival,
};

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::send_opportunity;
    std::uint64_t payload = 0;   // packet key or block slot
    std::uint64_t sequence = 0;  // insertion order, last tie-break
};

class EventQueue {
public:
    void push(double time, EventKind kind, std::uint64_t payload);
    Event pop();
    const Event& top() const { return heap_.top(); }
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const;
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_sequence_ = 0;
};

inline std::uint64_t packet_key(std::size_t slot, int sequence) {
    return (static_cast<std::uint64_t>(slot) << 24) | static_cast<std::uint64_t>(sequence);
}
inline std::size_t key_slot(std::uint64_t key) { return static_cast<std::size_t>(key >> 24); }
inline int key_sequence(std::uint64_t key) { return static_cast<int>(key & 0xFFFFFF); }

enum class LogKind : std::uint8_t {
    block_arrival,
    decision,
    packet_sent,
    packet_delivered,
    ack,
    loss_signal,
    block_expired,
    block_complete,
};

std::string_view to_string(LogKind kind);

inline constexpr std::uint32_t kNoSlot = std::numeric_limits<std::uint32_t>::max();

// One row of the run's event log. Fields not relevant to a kind stay at
// their defaults.
struct LogRecord {
    double time = 0.0;
    LogKind kind = LogKind::block_arrival;
    std::uint32_t slot = kNoSlot;
    std::int32_t sequence = -1;
    Bytes bytes = 0;
    std::int32_t retransmission = 0;  // copies sent before this one
    double enqueue_time = 0.0;        // packet_sent: when it entered the selection queue
    DecisionReason reason = DecisionReason::none_eligible;
    Regime regime = Regime::mid;
    double instantaneous_bps = 0.0;
    double smoothed_bps = 0.0;
};

struct LinkConfig {
    double rtt_s = 0.080;
    double loss_rate = 0.005;
    std::uint64_t seed = 1;
    // Transmission indices (0-based, in send order) that are always lost.
    std::vector<std::uint64_t> forced_losses;
};

struct SimulationConfig {
    LinkConfig link;
    RegimeThresholds thresholds = RegimeThresholds::from_mbps(0.8, 2.3);
    bool record_log = true;
};

// Single-threaded event loop: trace-limited serialisation, one-way delay
// of RTT/2, Bernoulli loss drawn per transmission, loss reported to the
// sender exactly one RTT after the lost packet left.
class Simulation {
public:
    Simulation(const LinkTrace& trace, std::vector<Block> blocks, Scheduler& scheduler, SimulationConfig config);

    // Processes the earliest event. Returns false once nothing is left.
    bool step();
    void run();

    double now() const noexcept { return clock_.now(); }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    const std::vector<LogRecord>& log() const noexcept { return log_; }
    const BlockAwaitingQueue& queue() const noexcept { return queue_; }
    const InflightLedger& ledger() const noexcept { return ledger_; }
    const BandwidthPredictor& predictor() const noexcept { return predictor_; }
    const CapacityProfile& capacity() const noexcept { return capacity_; }
    const SimulationConfig& config() const noexcept { return config_; }
    const Scheduler& scheduler() const noexcept { return scheduler_; }

    std::uint64_t transmissions() const noexcept { return send_index_; }
    std::uint64_t losses_drawn() const noexcept { return losses_drawn_; }

private:
    void request_opportunity();
    void on_send_opportunity();
    void complete_transmission();
    void on_packet_delivered(std::uint64_t key);
    void on_response(std::uint64_t key, bool lost);
    void on_block_arrival(std::size_t slot);
    void record(LogRecord r);

    Packet& packet_at(std::uint64_t key);

    CapacityProfile capacity_;
    std::vector<Block> blocks_;
    Scheduler& scheduler_;
    SimulationConfig config_;

    SimClock clock_;
    EventQueue events_;
    BlockAwaitingQueue queue_;
    InflightLedger ledger_;
    BandwidthPredictor predictor_;
    std::vector<LogRecord> log_;
    std::vector<Candidate> candidates_;

    std::optional<std::uint64_t> in_service_;
    bool opportunity_pending_ = false;
    std::mt19937_64 loss_rng_;
    std::uint64_t send_index_ = 0;
    std::uint64_t losses_drawn_ = 0;
};

}  // namespace dpsched
