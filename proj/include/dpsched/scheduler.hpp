#pragma once

#include "dpsched/core_model.hpp"
#include "dpsched/predictor.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpsched {

// The scheduler's view of one queued block.
struct BlockStats {
    double remaining_size_ratio = 0.0;      // Sr
    double remaining_deadline_ratio = 0.0;  // Dr = (E + D - now) / D
    int remaining_packets = 0;              // Pkt
    int priority = 0;                       // P
};

BlockStats compute_block_stats(const Block& block, double now);

struct Candidate {
    std::size_t slot = 0;
    BlockId id;
    BlockStats stats;
    bool retransmission = false;  // next packet to go out is a retransmission
    bool eligible = false;        // has a packet that can be sent now
    double arrival = 0.0;
    double expiry = 0.0;          // E + D
    Bytes remaining_bytes = 0;
};

Candidate make_candidate(const Block& block, double now);

enum class DecisionReason : std::uint8_t {
    retransmission,
    low_regime,
    high_regime,
    mid_size,
    mid_deadline,
    first_block,
    policy,  // baseline schedulers
    none_eligible,
};

std::string_view to_string(DecisionReason reason);

struct SchedulerDecision {
    std::optional<std::size_t> selected;  // slot of the chosen block
    DecisionReason reason = DecisionReason::none_eligible;
};

// Removes every block with now - E > D from the queue, marks it expired and
// discards its unsent packets. Returns the expired slots in queue order.
std::vector<std::size_t> filter_expired(BlockAwaitingQueue& queue, std::vector<Block>& blocks, double now);

// How the mid-bandwidth branch of the proposed scheduler resolves.
//   intended: switch when Sr*Pkt is strictly smaller, ties by smaller Dr/Pkt
//   literal:  as printed, the champion is kept under every outcome
enum class MidBranch : std::uint8_t { intended, literal };

// Single champion pass over the queue in arrival order:
//  - the first eligible block seeds the champion;
//  - a block with a pending retransmission takes over, and from then on only
//    another retransmission block can replace it (last one wins);
//  - Low regime:  keep the block maximising (Dr / Pkt) * (1 + P), later wins ties;
//  - High regime: switch when Dr * (1 + P) / Sr is <= the champion's,
//    otherwise fall through to the mid comparisons;
//  - Mid regime:  see MidBranch.
SchedulerDecision select_block_proposed(std::span<const Candidate> queue, Regime regime,
                                        MidBranch mid = MidBranch::intended);

// Earliest-arrival eligible block.
SchedulerDecision select_block_fifo(std::span<const Candidate> queue);

// Block-based approximation: smallest remaining size ratio, ties by arrival.
SchedulerDecision select_block_sfra(std::span<const Candidate> queue);

// Largest-deficit-first approximation. `deficit` is indexed by element id.
SchedulerDecision select_block_ldf(std::span<const Candidate> queue, std::span<const double> deficit);

// Weighted approximation: weight 1 + P, best weight among blocks whose
// remaining bytes fit the remaining time at the smoothed rate, ties by
// earliest deadline. Falls back to earliest deadline when nothing fits.
SchedulerDecision select_block_rswn(std::span<const Candidate> queue, double smoothed_bps, double now);

struct SchedulingContext {
    double now = 0.0;
    Regime regime = Regime::mid;
    double smoothed_bps = 0.0;
    std::span<const Candidate> candidates;
};

class Scheduler {
public:
    virtual ~Scheduler() = default;

    virtual std::string_view name() const = 0;
    // True for the reconstructed baselines.
    virtual bool is_approximation() const { return false; }

    virtual SchedulerDecision select(const SchedulingContext& ctx) = 0;
    virtual void on_block_completed(int /*element*/, bool /*on_time*/) {}
};

struct SchedulerOptions {
    MidBranch mid_branch = MidBranch::intended;
};

inline constexpr std::string_view kSchedulerNames[] = {"proposed", "fifo", "sfra", "ldf", "rswn"};

// Throws ConfigError on an unknown name.
std::unique_ptr<Scheduler> make_scheduler(std::string_view name, const ScenarioConfig& scenario,
                                          const SchedulerOptions& options = {});

// Deficit bookkeeping for the LDF baseline: every opportunity adds
// rate_k * elapsed to each element, every on-time block of element k
// removes one, floored at zero.
class DeficitTracker {
public:
    explicit DeficitTracker(std::vector<double> arrival_rates);

    void on_opportunity(double now);
    void on_block_completed(int element, bool on_time);

    std::span<const double> deficits() const noexcept { return deficits_; }

private:
    std::vector<double> rates_;
    std::vector<double> deficits_;
    double last_opportunity_ = 0.0;
};

}  // namespace dpsched
