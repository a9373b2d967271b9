#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpsched {

using Bytes = std::int64_t;

inline constexpr Bytes kPacketPayload = 1500;
inline constexpr double kBytesPerMbps = 1e6 / 8.0;

inline constexpr double mbps_to_bytes_per_s(double mbps) { return mbps * kBytesPerMbps; }
inline constexpr double bytes_per_s_to_mbps(double bps) { return bps / kBytesPerMbps; }

// One logical substream (control, audio, video signaling, ...). Every block
// of the element inherits its deadline and priority. Larger priority value
// means more important.
struct MediaElement {
    int element_id = 0;
    int priority = 0;
    double deadline_s = 0.0;
    Bytes block_size_bytes = kPacketPayload;
    double period_s = 0.0;
    // Block sizes are drawn uniformly from size * [1 - jitter, 1 + jitter].
    double size_jitter = 0.0;
};

struct ScenarioConfig {
    std::string name;
    std::vector<MediaElement> elements;

    // Nominal offered load in bytes/s (sum of size / period).
    double offered_rate() const;

    // Throws ConfigError on empty scenario, non-positive deadline/period/size,
    // jitter outside [0, 1) or a priority set that is not {0, ..., n-1}.
    void validate() const;
};

ScenarioConfig parse_scenario(std::string_view json_text, const std::string& source = "<scenario>");
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const ScenarioConfig& scenario);

// Rescales block sizes so the aggregate offered load equals `bytes_per_s`.
ScenarioConfig scale_to_offered_rate(const ScenarioConfig& scenario, double bytes_per_s);

struct BlockId {
    int element = 0;
    int index = 0;

    auto operator<=>(const BlockId&) const = default;
};

enum class PacketState : std::uint8_t {
    waiting,
    in_selection_queue,
    inflight,
    delivered,  // acknowledged at the sender
    lost_pending_retx,
    discarded,  // block expired before this packet went out
};

std::string_view to_string(PacketState state);

struct Packet {
    int sequence = 0;
    Bytes size = 0;
    PacketState state = PacketState::waiting;
    std::optional<double> enqueue_time;
    std::optional<double> send_time;
    std::optional<double> response_time;
    // Arrival at the client. Lost copies never set this.
    std::optional<double> received_time;
    int retransmissions = 0;
};

struct Block {
    std::size_t slot = 0;  // position in the run's block table
    BlockId id;
    double arrival = 0.0;
    double deadline = 0.0;
    int priority = 0;
    Bytes total_bytes = 0;
    std::vector<Packet> packets;
    std::optional<double> completion;  // F: client holds every packet
    bool expired = false;

    double expiry_time() const { return arrival + deadline; }

    // Bytes / packets not yet acknowledged at the sender.
    Bytes unacked_bytes() const;
    int unacked_packets() const;

    bool has_pending_retransmission() const;
    bool has_sendable_packet() const;

    // Retransmissions go first, then the lowest waiting sequence.
    Packet* next_sendable_packet();

    bool all_received() const;
    double last_receive_time() const;
};

// Splits `total` into MTU-sized packets; the last one may be short.
std::vector<Packet> packetize(Bytes total);

// Periodic per-element arrivals at v * period for v * period < duration.
// Blocks come back ordered by (arrival, element) with slot == position.
std::vector<Block> generate_blocks(const ScenarioConfig& scenario, double duration, std::uint64_t seed);

// Blocks waiting for (re)transmission, in arrival order. Holds slots into
// the run's block table.
class BlockAwaitingQueue {
public:
    void enqueue(const Block& block);
    void remove(std::size_t slot);
    bool contains(std::size_t slot) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const std::size_t> entries() const noexcept { return entries_; }

private:
    std::vector<std::size_t> entries_;
};

// Records F for a block the client now holds in full and drops it from the
// awaiting queue. Throws IllegalStateError if a packet is still missing at
// the client or F was already set.
void mark_block_complete(Block& block, double receive_time, BlockAwaitingQueue& queue);

class SimClock {
public:
    double now() const noexcept { return now_; }
    // Throws InvariantViolation when asked to move backwards.
    void advance_to(double t);

private:
    double now_ = 0.0;
};

}  // namespace dpsched
