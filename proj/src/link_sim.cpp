#include "dpsched/link_sim.hpp"

#include "dpsched/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dpsched {

double capacity_at(const LinkTrace& trace, double time) {
    if (trace.samples.empty()) throw ConfigError("trace '" + trace.source_tag + "' is empty");
    double t = time;
    if (trace.duration > 0.0 && t >= trace.duration) t = std::fmod(t, trace.duration);
    auto it = std::upper_bound(trace.samples.begin(), trace.samples.end(), t,
                               [](double value, const TraceSample& s) { return value < s.time; });
    if (it == trace.samples.begin()) return trace.samples.front().capacity_bps;
    return std::prev(it)->capacity_bps;
}

CapacityProfile::CapacityProfile(const LinkTrace& trace) {
    trace.validate();
    duration_ = trace.duration;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        bounds_.push_back(i == 0 ? 0.0 : trace.samples[i].time);
        capacities_.push_back(trace.samples[i].capacity_bps);
        max_capacity_ = std::max(max_capacity_, trace.samples[i].capacity_bps);
    }
    cumulative_.push_back(0.0);
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
        const double end = i + 1 < bounds_.size() ? bounds_[i + 1] : duration_;
        cumulative_.push_back(cumulative_.back() + capacities_[i] * (end - bounds_[i]));
    }
    period_bytes_ = cumulative_.back();
    if (!(period_bytes_ > 0.0)) throw ConfigError("trace '" + trace.source_tag + "' never offers any capacity");
}

double CapacityProfile::capacity_at(double time) const {
    double t = time >= duration_ ? std::fmod(time, duration_) : time;
    auto it = std::upper_bound(bounds_.begin(), bounds_.end(), t);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - bounds_.begin()) - 1));
    return capacities_[idx];
}

double CapacityProfile::bytes_until(double time) const {
    if (time <= 0.0) return 0.0;
    const double loops = std::floor(time / duration_);
    double rest = time - loops * duration_;
    rest = std::clamp(rest, 0.0, duration_);
    auto it = std::upper_bound(bounds_.begin(), bounds_.end(), rest);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - bounds_.begin()) - 1));
    return loops * period_bytes_ + cumulative_[idx] + capacities_[idx] * (rest - bounds_[idx]);
}

double CapacityProfile::finish_time(double start, double bytes) const {
    const double target = bytes_until(start) + bytes;
    double loops = std::floor(target / period_bytes_);
    double rest = target - loops * period_bytes_;
    if (rest < 0.0) rest = 0.0;
    if (rest > period_bytes_) rest = period_bytes_;
    // First segment whose end reaches `rest`.
    auto it = std::lower_bound(cumulative_.begin() + 1, cumulative_.end(), rest);
    auto idx = static_cast<std::size_t>(it - (cumulative_.begin() + 1));
    if (idx >= capacities_.size()) idx = capacities_.size() - 1;
    double t = bounds_[idx];
    if (capacities_[idx] > 0.0) t += (rest - cumulative_[idx]) / capacities_[idx];
    return std::max(start, loops * duration_ + t);
}

void EventQueue::push(double time, EventKind kind, std::uint64_t payload) {
    heap_.push(Event{time, kind, payload, next_sequence_++});
}

Event EventQueue::pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
}

bool EventQueue::Later::operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.payload != b.payload) return a.payload > b.payload;
    return a.sequence > b.sequence;
}

std::string_view to_string(LogKind kind) {
    switch (kind) {
        case LogKind::block_arrival: return "block_arrival";
        case LogKind::decision: return "decision";
        case LogKind::packet_sent: return "packet_sent";
        case LogKind::packet_delivered: return "packet_delivered";
        case LogKind::ack: return "ack";
        case LogKind::loss_signal: return "loss_signal";
        case LogKind::block_expired: return "block_expired";
        case LogKind::block_complete: return "block_complete";
    }
    return "unknown";
}

Simulation::Simulation(const LinkTrace& trace, std::vector<Block> blocks, Scheduler& scheduler,
                       SimulationConfig config)
    : capacity_(trace),
      blocks_(std::move(blocks)),
      scheduler_(scheduler),
      config_(config),
      predictor_(config.thresholds),
      loss_rng_(config.link.seed) {
    if (!(config_.link.rtt_s >= 0.0)) throw ConfigError("rtt must be >= 0");
    if (!(config_.link.loss_rate >= 0.0 && config_.link.loss_rate < 1.0)) {
        throw ConfigError("loss rate must lie in [0, 1)");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].slot != i) throw ConfigError("block table slots must match positions");
        if (blocks_[i].packets.size() >= (1u << 24)) throw ConfigError("block has too many packets");
        events_.push(blocks_[i].arrival, EventKind::block_arrival, i);
    }
}

void Simulation::record(LogRecord r) {
    if (config_.record_log) log_.push_back(r);
}

Packet& Simulation::packet_at(std::uint64_t key) {
    return blocks_.at(key_slot(key)).packets.at(static_cast<std::size_t>(key_sequence(key)));
}

bool Simulation::step() {
    if (events_.empty()) return false;
    const Event e = events_.pop();
    clock_.advance_to(e.time);
    switch (e.kind) {
        case EventKind::send_opportunity: on_send_opportunity(); break;
        case EventKind::packet_delivered: on_packet_delivered(e.payload); break;
        case EventKind::ack_at_sender: on_response(e.payload, false); break;
        case EventKind::loss_signal_at_sender: on_response(e.payload, true); break;
        case EventKind::block_arrival: on_block_arrival(static_cast<std::size_t>(e.payload)); break;
    }
    return true;
}

void Simulation::run() {
    while (step()) {
    }
}

void Simulation::request_opportunity() {
    if (in_service_ || opportunity_pending_) return;
    events_.push(clock_.now(), EventKind::send_opportunity, 0);
    opportunity_pending_ = true;
}

void Simulation::complete_transmission() {
    const std::uint64_t key = *in_service_;
    in_service_.reset();
    Packet& p = packet_at(key);
    const double now = clock_.now();
    p.state = PacketState::inflight;
    p.send_time = now;
    ledger_.add({key, p.size, now});
    predictor_.on_packet_sent(p.size, *p.enqueue_time, now);

    const double u = static_cast<double>(loss_rng_() >> 11) * 0x1.0p-53;
    const auto& forced = config_.link.forced_losses;
    const bool lost = u < config_.link.loss_rate ||
                      std::find(forced.begin(), forced.end(), send_index_) != forced.end();
    ++send_index_;

    LogRecord r;
    r.time = now;
    r.kind = LogKind::packet_sent;
    r.slot = static_cast<std::uint32_t>(key_slot(key));
    r.sequence = p.sequence;
    r.bytes = p.size;
    r.retransmission = p.retransmissions;
    r.enqueue_time = *p.enqueue_time;
    r.instantaneous_bps = predictor_.estimate().instantaneous_bps;
    r.smoothed_bps = predictor_.estimate().smoothed_bps;
    record(r);

    if (lost) {
        ++losses_drawn_;
        events_.push(now + config_.link.rtt_s, EventKind::loss_signal_at_sender, key);
    } else {
        events_.push(now + config_.link.rtt_s / 2.0, EventKind::packet_delivered, key);
    }
}

void Simulation::on_send_opportunity() {
    opportunity_pending_ = false;
    if (in_service_) complete_transmission();
    const double now = clock_.now();

    for (std::size_t slot : filter_expired(queue_, blocks_, now)) {
        LogRecord r;
        r.time = now;
        r.kind = LogKind::block_expired;
        r.slot = static_cast<std::uint32_t>(slot);
        record(r);
    }

    candidates_.clear();
    for (std::size_t slot : queue_.entries()) candidates_.push_back(make_candidate(blocks_[slot], now));

    const auto& est = predictor_.estimate();
    SchedulingContext ctx{now, est.regime, est.smoothed_bps, candidates_};
    const SchedulerDecision decision = scheduler_.select(ctx);

    LogRecord r;
    r.time = now;
    r.kind = LogKind::decision;
    r.reason = decision.reason;
    r.regime = est.regime;
    r.smoothed_bps = est.smoothed_bps;
    if (decision.selected) r.slot = static_cast<std::uint32_t>(*decision.selected);
    record(r);

    if (!decision.selected) return;  // link idles until something arrives

    const std::size_t slot = *decision.selected;
    if (!queue_.contains(slot)) throw InvariantViolation("scheduler picked a block that is not queued");
    Block& block = blocks_[slot];
    if (now - block.arrival > block.deadline) throw InvariantViolation("scheduler picked an expired block");
    Packet* p = block.next_sendable_packet();
    if (p == nullptr) throw InvariantViolation("scheduler picked a block with nothing to send");

    if (p->state == PacketState::lost_pending_retx) ++p->retransmissions;
    p->state = PacketState::in_selection_queue;
    p->enqueue_time = now;
    in_service_ = packet_key(slot, p->sequence);
    events_.push(capacity_.finish_time(now, static_cast<double>(p->size)), EventKind::send_opportunity, 0);
    opportunity_pending_ = true;
}

void Simulation::on_packet_delivered(std::uint64_t key) {
    const double now = clock_.now();
    Packet& p = packet_at(key);
    p.received_time = now;
    const std::size_t slot = key_slot(key);
    Block& block = blocks_[slot];

    LogRecord r;
    r.time = now;
    r.kind = LogKind::packet_delivered;
    r.slot = static_cast<std::uint32_t>(slot);
    r.sequence = p.sequence;
    r.bytes = p.size;
    r.retransmission = p.retransmissions;
    record(r);

    if (!block.completion && block.all_received()) {
        mark_block_complete(block, now, queue_);
        LogRecord c;
        c.time = now;
        c.kind = LogKind::block_complete;
        c.slot = static_cast<std::uint32_t>(slot);
        record(c);
        scheduler_.on_block_completed(block.id.element, now - block.arrival <= block.deadline);
    }
    events_.push(now + config_.link.rtt_s / 2.0, EventKind::ack_at_sender, key);
}

void Simulation::on_response(std::uint64_t key, bool lost) {
    const double now = clock_.now();
    Packet& p = packet_at(key);
    if (p.state != PacketState::inflight || !ledger_.contains(key)) {
        throw InvariantViolation("response for a packet that is not inflight");
    }
    predictor_.on_response(ledger_, *p.send_time, now);
    ledger_.remove(key);
    p.response_time = now;

    const std::size_t slot = key_slot(key);
    Block& block = blocks_[slot];
    if (!lost) {
        p.state = PacketState::delivered;
    } else {
        p.state = block.expired ? PacketState::discarded : PacketState::lost_pending_retx;
    }

    LogRecord r;
    r.time = now;
    r.kind = lost ? LogKind::loss_signal : LogKind::ack;
    r.slot = static_cast<std::uint32_t>(slot);
    r.sequence = p.sequence;
    r.bytes = p.size;
    r.retransmission = p.retransmissions;
    r.regime = predictor_.regime();
    r.instantaneous_bps = predictor_.estimate().instantaneous_bps;
    r.smoothed_bps = predictor_.estimate().smoothed_bps;
    record(r);

    if (lost && !block.expired) request_opportunity();
}

void Simulation::on_block_arrival(std::size_t slot) {
    Block& block = blocks_[slot];
    queue_.enqueue(block);
    LogRecord r;
    r.time = clock_.now();
    r.kind = LogKind::block_arrival;
    r.slot = static_cast<std::uint32_t>(slot);
    r.bytes = block.total_bytes;
    record(r);
    request_opportunity();
}

}  // namespace dpsched
