#include "dpsched/errors.hpp"
#include "dpsched/metrics.hpp"
#include "dpsched/runner.hpp"
#include "support/log_oracle.hpp"

#include <doctest.h>
#include <json.hpp>

#include <random>
#include <sstream>

using namespace dpsched;

namespace {

Block delivered_block(std::size_t slot, double arrival, double deadline, Bytes total, double finish,
                      int retx_on_first = 0) {
    Block b;
    b.slot = slot;
    b.id = {0, static_cast<int>(slot)};
    b.arrival = arrival;
    b.deadline = deadline;
    b.total_bytes = total;
    b.packets = packetize(total);
    for (auto& p : b.packets) {
        p.state = PacketState::delivered;
        p.received_time = finish;
    }
    b.packets[0].retransmissions = retx_on_first;
    b.completion = finish;
    return b;
}

}  // namespace

TEST_CASE("delivery indicator") {
    CHECK(delivery_indicator(0.0, 0.1, 0.1) == 1);
    CHECK(delivery_indicator(0.0, 0.2, 0.1) == 0);
    CHECK(delivery_indicator(0.0, std::nullopt, 0.1) == 0);
}

TEST_CASE("channel and effective utilization") {
    CHECK(channel_utilization(5e6, 10e6) == doctest::Approx(0.5));
    CHECK(channel_utilization(0.0, 10e6) == 0.0);
    CHECK(channel_utilization(10e6, 10e6) == 1.0);
    CHECK(channel_utilization(11e6, 10e6) == 1.0);
    CHECK_THROWS_AS(channel_utilization(1.0, 0.0), ConfigError);
    CHECK(effective_utilization(0.0, 10e6) == 0.0);
    CHECK_THROWS_AS(effective_utilization(1.0, 0.0), ConfigError);
}

TEST_CASE("session QoE") {
    CHECK(session_qoe(1.0, 1.0, 0.85) == doctest::Approx(1.85));
    CHECK(session_qoe(0.0, 0.0, 0.85) == 0.0);
    CHECK(session_qoe(0.7, 0.4, 0.0) == 0.7);
}

TEST_CASE("report: half the bytes on time gives half the utilization") {
    const std::vector<Block> blocks{delivered_block(0, 0.0, 0.1, 3000, 0.05),
                                    delivered_block(1, 0.0, 0.1, 3000, 0.5)};
    const QoEReport r = build_report(blocks, 12000.0, 10.0, 0.85);
    CHECK(r.delivery_ratio == 0.5);
    CHECK(r.utilization == doctest::Approx(0.5));
    CHECK(r.effective_utilization == doctest::Approx(r.utilization / 2));
    CHECK(r.qoe == doctest::Approx(0.5 + 0.85 * 0.5));
}

TEST_CASE("report: retransmitted copies count for utilization only") {
    const std::vector<Block> blocks{delivered_block(0, 0.0, 0.1, 3000, 0.05, 1)};
    const QoEReport r = build_report(blocks, 6000.0, 10.0, 0.85);
    CHECK(r.utilization == doctest::Approx(0.5));
    CHECK(r.retransmitted_bytes == 1500);
    CHECK(r.effective_utilization == doctest::Approx(0.25));
}

TEST_CASE("report: bytes received after the window are not counted") {
    const std::vector<Block> blocks{delivered_block(0, 9.9, 0.5, 3000, 10.2)};
    const QoEReport r = build_report(blocks, 6000.0, 10.0, 0.85);
    CHECK(r.delivery_ratio == 1.0);
    CHECK(r.utilization == 0.0);
}

TEST_CASE("report: empty run") {
    const QoEReport r = build_report({}, 100.0, 1.0, 0.85);
    CHECK(r.delivery_ratio == 0.0);
    CHECK(r.qoe == 0.0);
}

TEST_CASE("QoE monotonicity: turning a late block on time never lowers QoE") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> late(0.11, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Block> blocks;
        for (std::size_t i = 0; i < 8; ++i) blocks.push_back(delivered_block(i, 0.0, 0.1, 1500, late(rng)));
        const double offered = 1500.0 * 8;
        double prev = build_report(blocks, offered, 10.0, 0.85).qoe;
        for (auto& b : blocks) {
            b.completion = 0.05;
            b.packets[0].received_time = 0.05;
            const QoEReport r = build_report(blocks, offered, 10.0, 0.85);
            CHECK(r.qoe >= prev);
            CHECK(r.delivery_ratio <= 1.0);
            CHECK(r.qoe <= 1.0 + 0.85);
            CHECK(r.effective_utilization <= r.utilization);
            prev = r.qoe;
        }
    }
}

TEST_CASE("report matches an independent pass over the event log") {
    const ScenarioConfig s = load_scenario(std::string(DPSCHED_SCENARIO_DIR) + "/scenario_3.json");
    for (const auto& trace : synthetic_corpus(3, 30.0, 8)) {
        for (auto name : kSchedulerNames) {
            RunParams p;
            p.scheduler = std::string(name);
            p.duration_s = 30.0;
            p.loss_rate = 0.02;
            const RunResult r = run_simulation(s, trace, p);
            std::vector<double> deadlines;
            for (const auto& b : r.blocks) deadlines.push_back(b.deadline);
            const auto m = oracle::metrics_from_log(r.log, deadlines, r.offered_bytes, 30.0);
            CHECK(m.blocks == r.report.per_block.size());
            CHECK(m.delivery_ratio == r.report.delivery_ratio);
            CHECK(m.received_bytes == r.report.received_bytes);
            CHECK(m.first_copy_on_time_bytes == r.report.on_time_bytes);
            CHECK(m.retransmitted_bytes == r.report.retransmitted_bytes);
            CHECK(m.utilization == r.report.utilization);
            CHECK(m.effective_utilization == r.report.effective_utilization);
        }
    }
}

TEST_CASE("serialised report has a fixed key order") {
    const std::vector<Block> blocks{delivered_block(0, 0.0, 0.1, 3000, 0.05)};
    const QoEReport r = build_report(blocks, 6000.0, 10.0, 0.85);
    ReportMetadata meta;
    meta.scheduler = "proposed";
    const std::string text = report_to_jsonl(r, meta);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind(R"({"type":"block","element":0,"index":0,"arrival":0.0,"completion":0.05)", 0) == 0);
    std::getline(in, line);
    const auto summary = nlohmann::ordered_json::parse(line);
    CHECK(summary.begin().key() == "type");
    CHECK(summary["qoe"].get<double>() == r.qoe);
    CHECK(line == summary_to_json(r, meta));
}
