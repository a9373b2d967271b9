#include "dpsched/scheduler.hpp"

#include "dpsched/errors.hpp"

#include <algorithm>

namespace dpsched {

BlockStats compute_block_stats(const Block& block, double now) {
    BlockStats s;
    s.remaining_size_ratio = static_cast<double>(block.unacked_bytes()) / static_cast<double>(block.total_bytes);
    s.remaining_deadline_ratio = (block.arrival + block.deadline - now) / block.deadline;
    s.remaining_packets = block.unacked_packets();
    s.priority = block.priority;
    return s;
}

Candidate make_candidate(const Block& block, double now) {
    Candidate c;
    c.slot = block.slot;
    c.id = block.id;
    c.stats = compute_block_stats(block, now);
    c.retransmission = block.has_pending_retransmission();
    c.eligible = block.has_sendable_packet();
    c.arrival = block.arrival;
    c.expiry = block.expiry_time();
    c.remaining_bytes = block.unacked_bytes();
    return c;
}

std::string_view to_string(DecisionReason reason) {
    switch (reason) {
        case DecisionReason::retransmission: return "retransmission";
        case DecisionReason::low_regime: return "low_regime";
        case DecisionReason::high_regime: return "high_regime";
        case DecisionReason::mid_size: return "mid_size";
        case DecisionReason::mid_deadline: return "mid_deadline";
        case DecisionReason::first_block: return "first_block";
        case DecisionReason::policy: return "policy";
        case DecisionReason::none_eligible: return "none_eligible";
    }
    return "unknown";
}

std::vector<std::size_t> filter_expired(BlockAwaitingQueue& queue, std::vector<Block>& blocks, double now) {
    std::vector<std::size_t> expired;
    for (std::size_t slot : queue.entries()) {
        const Block& b = blocks.at(slot);
        if (now - b.arrival > b.deadline) expired.push_back(slot);
    }
    for (std::size_t slot : expired) {
        Block& b = blocks[slot];
        b.expired = true;
        for (auto& p : b.packets) {
            if (p.state == PacketState::waiting || p.state == PacketState::lost_pending_retx) {
                p.state = PacketState::discarded;
            }
        }
        queue.remove(slot);
    }
    return expired;
}

namespace {

double low_key(const BlockStats& s) {
    return s.remaining_deadline_ratio / s.remaining_packets * (1 + s.priority);
}

double high_key(const BlockStats& s) {
    return s.remaining_deadline_ratio * (1 + s.priority) / s.remaining_size_ratio;
}

double remaining_size(const BlockStats& s) { return s.remaining_size_ratio * s.remaining_packets; }

double deadline_per_packet(const BlockStats& s) { return s.remaining_deadline_ratio / s.remaining_packets; }

SchedulerDecision none() { return {std::nullopt, DecisionReason::none_eligible}; }

}  // namespace

SchedulerDecision select_block_proposed(std::span<const Candidate> queue, Regime regime, MidBranch mid) {
    const Candidate* champ = nullptr;
    DecisionReason reason = DecisionReason::none_eligible;

    for (const Candidate& c : queue) {
        if (!c.eligible) continue;
        if (champ == nullptr) {
            champ = &c;
            reason = c.retransmission ? DecisionReason::retransmission : DecisionReason::first_block;
            continue;
        }
        if (c.retransmission) {
            champ = &c;
            reason = DecisionReason::retransmission;
            continue;
        }
        if (champ->retransmission) continue;

        const BlockStats& best = champ->stats;
        const BlockStats& cand = c.stats;
        if (regime == Regime::low) {
            if (low_key(best) <= low_key(cand)) {
                champ = &c;
                reason = DecisionReason::low_regime;
            }
            continue;
        }
        if (regime == Regime::high && high_key(best) >= high_key(cand)) {
            champ = &c;
            reason = DecisionReason::high_regime;
            continue;
        }
        // Mid regime, or a High candidate that lost the high comparison.
        if (mid == MidBranch::literal) continue;
        const double best_size = remaining_size(best);
        const double cand_size = remaining_size(cand);
        if (cand_size < best_size) {
            champ = &c;
            reason = DecisionReason::mid_size;
        } else if (cand_size == best_size && deadline_per_packet(cand) < deadline_per_packet(best)) {
            champ = &c;
            reason = DecisionReason::mid_deadline;
        }
    }
    if (champ == nullptr) return none();
    return {champ->slot, reason};
}

SchedulerDecision select_block_fifo(std::span<const Candidate> queue) {
    for (const Candidate& c : queue) {
        if (c.eligible) return {c.slot, DecisionReason::policy};
    }
    return none();
}

SchedulerDecision select_block_sfra(std::span<const Candidate> queue) {
    const Candidate* champ = nullptr;
    for (const Candidate& c : queue) {
        if (!c.eligible) continue;
        if (champ == nullptr || c.stats.remaining_size_ratio < champ->stats.remaining_size_ratio) champ = &c;
    }
    if (champ == nullptr) return none();
    return {champ->slot, DecisionReason::policy};
}

SchedulerDecision select_block_ldf(std::span<const Candidate> queue, std::span<const double> deficit) {
    const Candidate* champ = nullptr;
    double champ_deficit = 0.0;
    for (const Candidate& c : queue) {
        if (!c.eligible) continue;
        const auto k = static_cast<std::size_t>(c.id.element);
        const double d = k < deficit.size() ? deficit[k] : 0.0;
        if (champ == nullptr || d > champ_deficit) {
            champ = &c;
            champ_deficit = d;
        }
    }
    if (champ == nullptr) return none();
    return {champ->slot, DecisionReason::policy};
}

SchedulerDecision select_block_rswn(std::span<const Candidate> queue, double smoothed_bps, double now) {
    const Candidate* best_fit = nullptr;
    const Candidate* earliest = nullptr;
    for (const Candidate& c : queue) {
        if (!c.eligible) continue;
        if (earliest == nullptr || c.expiry < earliest->expiry) earliest = &c;

        const double slack = c.expiry - now;
        const bool completable =
            smoothed_bps > 0.0 && static_cast<double>(c.remaining_bytes) / smoothed_bps <= slack;
        if (!completable) continue;
        if (best_fit == nullptr || c.stats.priority > best_fit->stats.priority ||
            (c.stats.priority == best_fit->stats.priority && c.expiry < best_fit->expiry)) {
            best_fit = &c;
        }
    }
    const Candidate* champ = best_fit != nullptr ? best_fit : earliest;
    if (champ == nullptr) return none();
    return {champ->slot, DecisionReason::policy};
}

DeficitTracker::DeficitTracker(std::vector<double> arrival_rates)
    : rates_(std::move(arrival_rates)), deficits_(rates_.size(), 0.0) {}

void DeficitTracker::on_opportunity(double now) {
    const double elapsed = std::max(0.0, now - last_opportunity_);
    for (std::size_t k = 0; k < rates_.size(); ++k) deficits_[k] += rates_[k] * elapsed;
    last_opportunity_ = now;
}

void DeficitTracker::on_block_completed(int element, bool on_time) {
    if (!on_time) return;
    const auto k = static_cast<std::size_t>(element);
    if (k >= deficits_.size()) return;
    deficits_[k] = std::max(0.0, deficits_[k] - 1.0);
}

namespace {

class ProposedScheduler final : public Scheduler {
public:
    explicit ProposedScheduler(MidBranch mid) : mid_(mid) {}
    std::string_view name() const override { return "proposed"; }
    SchedulerDecision select(const SchedulingContext& ctx) override {
        return select_block_proposed(ctx.candidates, ctx.regime, mid_);
    }

private:
    MidBranch mid_;
};

class FifoScheduler final : public Scheduler {
public:
    std::string_view name() const override { return "fifo"; }
    SchedulerDecision select(const SchedulingContext& ctx) override { return select_block_fifo(ctx.candidates); }
};

class SfraScheduler final : public Scheduler {
public:
    std::string_view name() const override { return "sfra"; }
    bool is_approximation() const override { return true; }
    SchedulerDecision select(const SchedulingContext& ctx) override { return select_block_sfra(ctx.candidates); }
};

class LdfScheduler final : public Scheduler {
public:
    explicit LdfScheduler(std::vector<double> rates) : tracker_(std::move(rates)) {}
    std::string_view name() const override { return "ldf"; }
    bool is_approximation() const override { return true; }
    SchedulerDecision select(const SchedulingContext& ctx) override {
        tracker_.on_opportunity(ctx.now);
        return select_block_ldf(ctx.candidates, tracker_.deficits());
    }
    void on_block_completed(int element, bool on_time) override { tracker_.on_block_completed(element, on_time); }

private:
    DeficitTracker tracker_;
};

class RswnScheduler final : public Scheduler {
public:
    std::string_view name() const override { return "rswn"; }
    bool is_approximation() const override { return true; }
    SchedulerDecision select(const SchedulingContext& ctx) override {
        return select_block_rswn(ctx.candidates, ctx.smoothed_bps, ctx.now);
    }
};

}  // namespace

std::unique_ptr<Scheduler> make_scheduler(std::string_view name, const ScenarioConfig& scenario,
                                          const SchedulerOptions& options) {
    if (name == "proposed") return std::make_unique<ProposedScheduler>(options.mid_branch);
    if (name == "fifo") return std::make_unique<FifoScheduler>();
    if (name == "sfra") return std::make_unique<SfraScheduler>();
    if (name == "rswn") return std::make_unique<RswnScheduler>();
    if (name == "ldf") {
        std::vector<double> rates;
        for (const auto& e : scenario.elements) {
            const auto k = static_cast<std::size_t>(e.element_id);
            if (rates.size() <= k) rates.resize(k + 1, 0.0);
            rates[k] = 1.0 / e.period_s;
        }
        return std::make_unique<LdfScheduler>(std::move(rates));
    }
    throw ConfigError("unknown scheduler '" + std::string(name) + "' (expected proposed, fifo, sfra, ldf or rswn)");
}

}  // namespace dpsched
