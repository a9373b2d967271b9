#pragma once

#include "selection_oracle.hpp"

#include "dpsched/scheduler.hpp"

#include <random>
#include <vector>

namespace oracle {

// Random queue of up to five blocks. Values are drawn from coarse grids so
// that ties in every branch key show up regularly.
struct RandomQueue {
    std::vector<RawBlock> raw;
    std::vector<dpsched::Candidate> candidates;
};

inline RandomQueue random_queue(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(0, 5);
    std::uniform_int_distribution<int> total_pkts(1, 6);
    std::uniform_int_distribution<int> prio(0, 2);
    std::uniform_int_distribution<int> dr_step(0, 4);
    std::uniform_int_distribution<int> pct(0, 99);

    RandomQueue q;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        const int total = total_pkts(rng);
        const int left = std::uniform_int_distribution<int>(1, total)(rng);
        RawBlock b;
        b.Pkt = left;
        b.Sr = static_cast<double>(left) / total;
        b.Dr = dr_step(rng) * 0.25;
        b.P = prio(rng);
        b.retx = pct(rng) < 20;
        b.sendable = pct(rng) < 85;
        q.raw.push_back(b);

        dpsched::Candidate c;
        c.slot = static_cast<std::size_t>(100 + i);
        c.id = {b.P, i};
        c.stats = {b.Sr, b.Dr, b.Pkt, b.P};
        c.retransmission = b.retx;
        c.eligible = b.sendable;
        c.arrival = 0.01 * i;
        c.expiry = c.arrival + 0.2;
        c.remaining_bytes = 1500 * left;
        q.candidates.push_back(c);
    }
    return q;
}

inline std::string reason_name(dpsched::DecisionReason r) { return std::string(dpsched::to_string(r)); }

// Number of mismatches between the library and the oracle over `n` queues.
inline int count_mismatches(int n, std::uint64_t seed, bool literal_mid) {
    std::mt19937_64 rng(seed);
    int mismatches = 0;
    for (int i = 0; i < n; ++i) {
        const RandomQueue q = random_queue(rng);
        const int regime = i % 3;
        const Outcome want = select(q.raw, regime, literal_mid);
        const auto got = dpsched::select_block_proposed(
            q.candidates, static_cast<dpsched::Regime>(regime),
            literal_mid ? dpsched::MidBranch::literal : dpsched::MidBranch::intended);
        const int got_index = got.selected ? static_cast<int>(*got.selected) - 100 : -1;
        if (got_index != want.index || reason_name(got.reason) != want.reason) ++mismatches;
    }
    return mismatches;
}

}  // namespace oracle
