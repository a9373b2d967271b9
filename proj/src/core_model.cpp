#include "dpsched/core_model.hpp"

#include "dpsched/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dpsched {

using nlohmann::json;
using nlohmann::ordered_json;

double ScenarioConfig::offered_rate() const {
    double rate = 0.0;
    for (const auto& e : elements) {
        rate += static_cast<double>(e.block_size_bytes) / e.period_s;
    }
    return rate;
}

void ScenarioConfig::validate() const {
    if (elements.empty()) {
        throw ConfigError("scenario '" + name + "' has no media elements");
    }
    std::set<int> priorities;
    for (const auto& e : elements) {
        const std::string where = "scenario '" + name + "' element " + std::to_string(e.element_id);
        if (!(e.deadline_s > 0.0)) throw ConfigError(where + ": deadline_s must be > 0");
        if (!(e.period_s > 0.0)) throw ConfigError(where + ": period_s must be > 0");
        if (e.block_size_bytes < 1) throw ConfigError(where + ": block_size_bytes must be >= 1");
        if (!(e.size_jitter >= 0.0 && e.size_jitter < 1.0)) {
            throw ConfigError(where + ": size_jitter must lie in [0, 1)");
        }
        if (e.priority < 0) throw ConfigError(where + ": priority must be >= 0");
        priorities.insert(e.priority);
    }
    // Contiguous from zero; duplicates allowed.
    int expected = 0;
    for (int p : priorities) {
        if (p != expected++) {
            throw ConfigError("scenario '" + name + "': priorities must form a contiguous set starting at 0");
        }
    }
}

ScenarioConfig parse_scenario(std::string_view json_text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    ScenarioConfig scenario;
    try {
        scenario.name = doc.value("name", std::string{});
        const auto& elements = doc.at("elements");
        int index = 0;
        for (const auto& item : elements) {
            MediaElement e;
            e.element_id = index++;
            e.priority = item.at("priority").get<int>();
            e.deadline_s = item.at("deadline_s").get<double>();
            e.block_size_bytes = item.at("block_size_bytes").get<Bytes>();
            e.period_s = item.at("period_s").get<double>();
            e.size_jitter = item.value("size_jitter", 0.0);
            scenario.elements.push_back(e);
        }
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    if (scenario.name.empty()) scenario.name = source;
    scenario.validate();
    return scenario;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path.string());
}

std::string serialize_scenario(const ScenarioConfig& scenario) {
    ordered_json doc;
    doc["name"] = scenario.name;
    doc["elements"] = ordered_json::array();
    for (const auto& e : scenario.elements) {
        ordered_json item;
        item["priority"] = e.priority;
        item["deadline_s"] = e.deadline_s;
        item["block_size_bytes"] = e.block_size_bytes;
        item["period_s"] = e.period_s;
        item["size_jitter"] = e.size_jitter;
        doc["elements"].push_back(item);
    }
    return doc.dump(2) + "\n";
}

ScenarioConfig scale_to_offered_rate(const ScenarioConfig& scenario, double bytes_per_s) {
    scenario.validate();
    if (!(bytes_per_s > 0.0)) throw ConfigError("offered rate must be > 0");
    const double factor = bytes_per_s / scenario.offered_rate();
    ScenarioConfig scaled = scenario;
    for (auto& e : scaled.elements) {
        e.block_size_bytes = std::max<Bytes>(1, std::llround(static_cast<double>(e.block_size_bytes) * factor));
    }
    return scaled;
}

std::string_view to_string(PacketState state) {
    switch (state) {
        case PacketState::waiting: return "waiting";
        case PacketState::in_selection_queue: return "in_selection_queue";
        case PacketState::inflight: return "inflight";
        case PacketState::delivered: return "delivered";
        case PacketState::lost_pending_retx: return "lost_pending_retx";
        case PacketState::discarded: return "discarded";
    }
    return "unknown";
}

Bytes Block::unacked_bytes() const {
    Bytes sum = 0;
    for (const auto& p : packets) {
        if (p.state != PacketState::delivered) sum += p.size;
    }
    return sum;
}

int Block::unacked_packets() const {
    return static_cast<int>(std::count_if(packets.begin(), packets.end(),
                                          [](const Packet& p) { return p.state != PacketState::delivered; }));
}

bool Block::has_pending_retransmission() const {
    return std::any_of(packets.begin(), packets.end(),
                       [](const Packet& p) { return p.state == PacketState::lost_pending_retx; });
}

bool Block::has_sendable_packet() const {
    return std::any_of(packets.begin(), packets.end(), [](const Packet& p) {
        return p.state == PacketState::waiting || p.state == PacketState::lost_pending_retx;
    });
}

Packet* Block::next_sendable_packet() {
    for (auto& p : packets) {
        if (p.state == PacketState::lost_pending_retx) return &p;
    }
    for (auto& p : packets) {
        if (p.state == PacketState::waiting) return &p;
    }
    return nullptr;
}

bool Block::all_received() const {
    return std::all_of(packets.begin(), packets.end(), [](const Packet& p) { return p.received_time.has_value(); });
}

double Block::last_receive_time() const {
    double latest = arrival;
    for (const auto& p : packets) {
        if (p.received_time) latest = std::max(latest, *p.received_time);
    }
    return latest;
}

std::vector<Packet> packetize(Bytes total) {
    std::vector<Packet> packets;
    int seq = 0;
    for (Bytes offset = 0; offset < total; offset += kPacketPayload) {
        Packet p;
        p.sequence = seq++;
        p.size = std::min(kPacketPayload, total - offset);
        packets.push_back(p);
    }
    return packets;
}

std::vector<Block> generate_blocks(const ScenarioConfig& scenario, double duration, std::uint64_t seed) {
    scenario.validate();
    std::vector<Block> blocks;
    if (!(duration > 0.0)) return blocks;

    std::mt19937_64 rng(seed);
    for (const auto& e : scenario.elements) {
        for (int v = 0;; ++v) {
            const double arrival = v * e.period_s;
            if (arrival >= duration) break;
            Bytes size = e.block_size_bytes;
            if (e.size_jitter > 0.0) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                const double factor = 1.0 + e.size_jitter * (2.0 * u - 1.0);
                size = std::max<Bytes>(1, std::llround(static_cast<double>(size) * factor));
            }
            Block b;
            b.id = {e.element_id, v};
            b.arrival = arrival;
            b.deadline = e.deadline_s;
            b.priority = e.priority;
            b.total_bytes = size;
            b.packets = packetize(size);
            blocks.push_back(std::move(b));
        }
    }
    std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
        if (a.arrival != b.arrival) return a.arrival < b.arrival;
        return a.id < b.id;
    });
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].slot = i;
    return blocks;
}

void BlockAwaitingQueue::enqueue(const Block& block) {
    if (contains(block.slot)) {
        throw DuplicateEntryError("block (" + std::to_string(block.id.element) + "," +
                                  std::to_string(block.id.index) + ") is already queued");
    }
    if (block.completion || block.all_received()) {
        throw IllegalStateError("cannot queue a block the client already holds");
    }
    entries_.push_back(block.slot);
}

void BlockAwaitingQueue::remove(std::size_t slot) {
    auto it = std::find(entries_.begin(), entries_.end(), slot);
    if (it != entries_.end()) entries_.erase(it);
}

bool BlockAwaitingQueue::contains(std::size_t slot) const {
    return std::find(entries_.begin(), entries_.end(), slot) != entries_.end();
}

void mark_block_complete(Block& block, double receive_time, BlockAwaitingQueue& queue) {
    if (block.completion) throw IllegalStateError("block completion time already set");
    if (!block.all_received()) throw IllegalStateError("block still has packets the client has not received");
    if (receive_time < block.arrival) throw IllegalStateError("completion precedes block arrival");
    block.completion = receive_time;
    queue.remove(block.slot);
}

void SimClock::advance_to(double t) {
    if (t < now_) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "event at t=" << t << " precedes clock " << now_;
        throw InvariantViolation(msg.str());
    }
    now_ = t;
}

}  // namespace dpsched
