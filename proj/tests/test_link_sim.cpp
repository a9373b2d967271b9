#include "dpsched/errors.hpp"
#include "dpsched/link_sim.hpp"
#include "dpsched/runner.hpp"

#include <doctest.h>

#include <map>

using namespace dpsched;

namespace {

LinkTrace constant_trace(double mbps, double duration) {
    SyntheticParams p;
    p.rate_mbps = mbps;
    return synthesize_trace(SyntheticKind::constant, p, duration, 1);
}

LinkTrace two_step_trace() {
    LinkTrace t;
    t.samples = {{0.0, mbps_to_bytes_per_s(2.0)}, {1.0, mbps_to_bytes_per_s(0.5)}};
    t.duration = 2.0;
    t.source_tag = "two_step";
    return t;
}

ScenarioConfig scenario_1() { return load_scenario(std::string(DPSCHED_SCENARIO_DIR) + "/scenario_1.json"); }

RunResult square_run(const std::string& sched, std::uint64_t seed, double loss) {
    SyntheticParams sp;
    sp.low_mbps = 0.5;
    sp.high_mbps = 2.5;
    RunParams p;
    p.scheduler = sched;
    p.seed = seed;
    p.loss_rate = loss;
    p.duration_s = 30.0;
    return run_simulation(scenario_1(), synthesize_trace(SyntheticKind::square_wave, sp, 30.0, 1), p);
}

}  // namespace

TEST_CASE("capacity lookup, looping and empty traces") {
    const LinkTrace t = two_step_trace();
    CHECK(capacity_at(t, 0.5) == mbps_to_bytes_per_s(2.0));
    CHECK(capacity_at(t, 1.5) == mbps_to_bytes_per_s(0.5));
    CHECK(capacity_at(t, 2.5) == capacity_at(t, 0.5));
    CHECK(capacity_at(t, 3.5) == capacity_at(t, 1.5));
    CHECK_THROWS_AS(capacity_at(LinkTrace{}, 0.0), ConfigError);

    const CapacityProfile prof(t);
    CHECK(prof.capacity_at(1.5) == mbps_to_bytes_per_s(0.5));
    CHECK(prof.bytes_until(1.0) == doctest::Approx(250000.0));
    CHECK(prof.bytes_until(2.0) == doctest::Approx(312500.0));
    CHECK(prof.bytes_until(3.0) == doctest::Approx(562500.0));
    CHECK(prof.finish_time(0.0, 250000.0 + 62500.0 / 2) == doctest::Approx(1.5));
}

TEST_CASE("1 Mbps link serialises a 1500-byte packet in 12 ms") {
    const CapacityProfile prof(constant_trace(1.0, 10.0));
    CHECK(prof.finish_time(0.0, 1500.0) == doctest::Approx(0.012));
    CHECK(prof.finish_time(9.995, 1500.0) == doctest::Approx(10.007));
}

TEST_CASE("event queue tie-breaking") {
    EventQueue q;
    q.push(1.0, EventKind::block_arrival, 0);
    q.push(1.0, EventKind::send_opportunity, 0);
    q.push(0.5, EventKind::loss_signal_at_sender, 9);
    q.push(1.0, EventKind::packet_delivered, 5);
    q.push(1.0, EventKind::packet_delivered, 2);
    CHECK(q.pop().time == 0.5);
    CHECK(q.pop().kind == EventKind::send_opportunity);
    CHECK(q.pop().payload == 2);
    CHECK(q.pop().payload == 5);
    CHECK(q.pop().kind == EventKind::block_arrival);
    CHECK(q.empty());
}

TEST_CASE("single packet: delivered one transmission plus half an RTT later") {
    const ScenarioConfig s{"one", {MediaElement{0, 0, 1.0, 1500, 10.0, 0.0}}};
    auto sched = make_scheduler("proposed", s);
    SimulationConfig cfg;
    cfg.link.loss_rate = 0.0;
    cfg.link.rtt_s = 0.08;
    Simulation sim(constant_trace(1.0, 10.0), generate_blocks(s, 1.0, 1), *sched, cfg);
    sim.run();
    double delivered = -1.0, ack = -1.0, sent = -1.0;
    for (const auto& r : sim.log()) {
        if (r.kind == LogKind::packet_sent) sent = r.time;
        if (r.kind == LogKind::packet_delivered) delivered = r.time;
        if (r.kind == LogKind::ack) ack = r.time;
    }
    CHECK(sent == doctest::Approx(0.012));
    CHECK(delivered == doctest::Approx(0.052));
    CHECK(ack == doctest::Approx(0.092));
    REQUIRE(sim.blocks()[0].completion);
    CHECK(*sim.blocks()[0].completion == doctest::Approx(0.052));
}

TEST_CASE("zero loss rate never signals a loss") {
    const RunResult r = square_run("proposed", 4, 0.0);
    for (const auto& rec : r.log) CHECK(rec.kind != LogKind::loss_signal);
    CHECK(r.losses == 0);
}

TEST_CASE("determinism: identical inputs give identical logs") {
    const RunResult a = square_run("rswn", 9, 0.02);
    const RunResult b = square_run("rswn", 9, 0.02);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].time == b.log[i].time);
        CHECK(a.log[i].kind == b.log[i].kind);
        CHECK(a.log[i].slot == b.log[i].slot);
        CHECK(a.log[i].sequence == b.log[i].sequence);
    }
    CHECK(summary_to_json(a.report, a.meta) == summary_to_json(b.report, b.meta));
}

TEST_CASE("FIFO link: deliveries follow send order") {
    const RunResult r = square_run("proposed", 2, 0.02);
    std::vector<std::pair<std::uint32_t, int>> sent_ok, delivered;
    std::map<std::pair<std::uint32_t, int>, int> lost;
    for (const auto& rec : r.log) {
        if (rec.kind == LogKind::loss_signal) ++lost[{rec.slot, rec.sequence}];
    }
    std::map<std::pair<std::uint32_t, int>, int> lost_seen;
    for (const auto& rec : r.log) {
        if (rec.kind == LogKind::packet_sent) {
            // a copy whose loss is signalled later never reaches the client
            const auto key = std::make_pair(rec.slot, rec.sequence);
            if (lost_seen[key] < lost[key]) {
                ++lost_seen[key];
            } else {
                sent_ok.push_back(key);
            }
        }
        if (rec.kind == LogKind::packet_delivered) delivered.emplace_back(rec.slot, rec.sequence);
    }
    CHECK(sent_ok == delivered);
}

TEST_CASE("throughput bound over arbitrary windows") {
    const RunResult r = square_run("fifo", 3, 0.01);
    SyntheticParams sp;
    sp.low_mbps = 0.5;
    sp.high_mbps = 2.5;
    const CapacityProfile prof(synthesize_trace(SyntheticKind::square_wave, sp, 30.0, 1));
    std::vector<std::pair<double, Bytes>> sends;
    for (const auto& rec : r.log) {
        if (rec.kind == LogKind::packet_sent) sends.emplace_back(rec.time, rec.bytes);
    }
    for (double t1 = 0.0; t1 < 29.0; t1 += 0.37) {
        for (double w : {0.05, 0.3, 1.0, 2.5}) {
            Bytes sum = 0;
            for (auto [t, b] : sends) {
                if (t >= t1 && t <= t1 + w) sum += b;
            }
            CHECK(static_cast<double>(sum) <= prof.bytes_between(t1, t1 + w) + 1500.0 + 1e-6);
        }
    }
}

TEST_CASE("loss accounting and single re-queue per loss") {
    const RunResult r = square_run("proposed", 12, 0.05);
    std::size_t signals = 0;
    std::map<std::pair<std::uint32_t, int>, int> copies, losses;
    for (const auto& rec : r.log) {
        if (rec.kind == LogKind::loss_signal) {
            ++signals;
            ++losses[{rec.slot, rec.sequence}];
        }
        if (rec.kind == LogKind::packet_sent) ++copies[{rec.slot, rec.sequence}];
    }
    CHECK(signals == r.losses);
    CHECK(signals > 0);
    for (const auto& [key, n] : losses) {
        const Block& b = r.blocks[key.first];
        const Packet& p = b.packets[static_cast<std::size_t>(key.second)];
        if (p.state == PacketState::discarded) {
            CHECK(copies[key] == n);
        } else {
            CHECK(copies[key] == n + 1);
        }
    }
}

TEST_CASE("block completion is never earlier than its last packet can arrive") {
    const RunResult r = square_run("ldf", 5, 0.01);
    for (const Block& b : r.blocks) {
        if (!b.completion) continue;
        CHECK(*b.completion >= b.arrival + 0.04);
        CHECK(*b.completion == b.last_receive_time());
    }
}

TEST_CASE("saturated replay tracks the trace mean") {
    const ScenarioConfig s{"sat", {MediaElement{0, 0, 5.0, 30000, 0.05, 0.0}}};
    for (const LinkTrace& trace : synthetic_corpus(4, 40.0, 17)) {
        RunParams p;
        p.scheduler = "fifo";
        p.duration_s = 40.0;
        p.offered_load = 0.0;
        p.loss_rate = 0.0;
        const RunResult r = run_simulation(s, trace, p);
        CHECK(r.report.utilization <= 1.0);
        const double rate = static_cast<double>(r.report.received_bytes) / 40.0;
        CHECK(rate == doctest::Approx(trace.mean_bps()).epsilon(0.10));
    }
}

TEST_CASE("rejects bad link parameters") {
    const ScenarioConfig s{"one", {MediaElement{0, 0, 1.0, 1500, 10.0, 0.0}}};
    auto sched = make_scheduler("fifo", s);
    SimulationConfig cfg;
    cfg.link.loss_rate = 1.0;
    CHECK_THROWS_AS(Simulation(constant_trace(1.0, 5.0), {}, *sched, cfg), ConfigError);
}
