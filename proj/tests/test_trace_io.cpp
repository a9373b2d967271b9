#include "dpsched/core_model.hpp"
#include "dpsched/errors.hpp"
#include "dpsched/trace_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace dpsched;
namespace fs = std::filesystem;

namespace {

LinkTrace from_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_csv_trace(in, "inline.csv");
}

LinkTrace from_opportunities(const std::string& text) {
    std::istringstream in(text);
    return parse_packet_opportunity_trace(in, "inline.trace");
}

LinkTrace constant(double mbps, double duration) {
    SyntheticParams p;
    p.rate_mbps = mbps;
    return synthesize_trace(SyntheticKind::constant, p, duration, 1);
}

void check_same_samples(const LinkTrace& a, const LinkTrace& b) {
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].time == b.samples[i].time);
        CHECK(a.samples[i].capacity_bps == b.samples[i].capacity_bps);
    }
    CHECK(a.duration == b.duration);
}

}  // namespace

TEST_CASE("opportunity trace: 667 uniform opportunities in one second") {
    std::ostringstream text;
    for (int i = 0; i < 667; ++i) text << (i * 1000) / 667 << '\n';
    const LinkTrace t = from_opportunities(text.str());
    REQUIRE(t.samples.size() == 1);
    CHECK(bytes_per_s_to_mbps(t.samples[0].capacity_bps) == doctest::Approx(8.004));
    CHECK(t.duration == 1.0);
}

TEST_CASE("opportunity trace: minimal and malformed input") {
    const LinkTrace t = from_opportunities("0\n");
    REQUIRE(t.samples.size() == 1);
    CHECK(t.samples[0].capacity_bps * 8 == doctest::Approx(12000.0));

    try {
        from_opportunities("12ab\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    try {
        from_opportunities("5\n10\n7\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(from_opportunities(""), ParseError);
    CHECK_THROWS_AS(from_opportunities("1.5\n"), ParseError);
}

TEST_CASE("opportunity trace: empty buckets become zero-capacity samples") {
    const LinkTrace t = from_opportunities("0\n10\n2500\n");
    REQUIRE(t.samples.size() == 3);
    CHECK(t.samples[0].capacity_bps == 3000.0);
    CHECK(t.samples[1].capacity_bps == 0.0);
    CHECK(t.samples[2].capacity_bps == 1500.0);
    CHECK(t.duration == 3.0);
}

TEST_CASE("csv trace") {
    const LinkTrace t = from_csv("0,1.5\n1,2.0\n");
    REQUIRE(t.samples.size() == 2);
    CHECK(t.samples[0].time == 0.0);
    CHECK(t.samples[0].capacity_bps == mbps_to_bytes_per_s(1.5));
    CHECK(t.samples[1].time == 1.0);
    CHECK(t.samples[1].capacity_bps == mbps_to_bytes_per_s(2.0));
    CHECK(t.duration == 2.0);
    CHECK(from_csv("# header\n\n0,1\n").samples.size() == 1);

    CHECK_THROWS_AS(from_csv(""), ParseError);
    CHECK_THROWS_AS(from_csv("0,-1\n"), ParseError);
    CHECK_THROWS_AS(from_csv("0,1\n0,2\n"), ParseError);
    CHECK_THROWS_AS(from_csv("0;1\n"), ParseError);
}

TEST_CASE("trace statistics") {
    LinkTrace t = from_csv("0,1\n2,3\n");  // 1 Mbps for 2 s, 3 Mbps for 2 s
    CHECK(bytes_per_s_to_mbps(t.mean_bps()) == doctest::Approx(2.0));
    CHECK(bytes_per_s_to_mbps(t.min_bps()) == doctest::Approx(1.0));
    CHECK(bytes_per_s_to_mbps(t.max_bps()) == doctest::Approx(3.0));
}

TEST_CASE("round trip through both formats") {
    const LinkTrace csv = from_csv("0,1.5\n1,0.3333333333333333\n2.5,2.75\n");
    std::ostringstream out;
    write_csv_trace(out, csv);
    check_same_samples(csv, from_csv(out.str()));

    for (const auto& t : synthetic_corpus(6, 30.0, 99)) {
        std::ostringstream o;
        write_csv_trace(o, t);
        const LinkTrace back = from_csv(o.str());
        REQUIRE(back.samples.size() == t.samples.size());
        for (std::size_t i = 0; i < t.samples.size(); ++i) {
            CHECK(back.samples[i].capacity_bps == t.samples[i].capacity_bps);
        }
    }

    std::ostringstream text;
    for (int ms : {0, 3, 400, 999, 1000, 3500, 3501}) text << ms << '\n';
    const LinkTrace opp = from_opportunities(text.str());
    std::ostringstream re;
    write_packet_opportunity_trace(re, opp);
    check_same_samples(opp, from_opportunities(re.str()));
}

TEST_CASE("save and load pick the format by extension") {
    const fs::path dir = fs::path(DPSCHED_TEST_TMP) / "trace_io";
    fs::create_directories(dir);
    const LinkTrace t = constant(1.2, 5.0);
    save_trace(dir / "c.csv", t);
    save_trace(dir / "c.trace", t);
    const LinkTrace a = load_trace(dir / "c.csv");
    const LinkTrace b = load_trace(dir / "c.trace");
    CHECK(a.source_tag == "c.csv");
    CHECK(a.mean_bps() == doctest::Approx(t.mean_bps()));
    CHECK(b.mean_bps() == doctest::Approx(t.mean_bps()).epsilon(0.01));
    CHECK_THROWS_AS(load_trace(dir / "missing.csv"), ConfigError);

    std::ofstream(dir / "notes.txt") << "ignored\n";
    const auto files = list_trace_files(dir);
    REQUIRE(files.size() == 2);
    CHECK(files[0].filename() == "c.csv");
    CHECK(load_corpus(dir).size() == 2);
    CHECK_THROWS_AS(list_trace_files(dir / "nope"), ConfigError);
}

TEST_CASE("corpus filter") {
    SyntheticParams dip;
    dip.low_mbps = 0.1;
    dip.high_mbps = 2.0;
    CHECK(passes_filter(constant(1.0, 10.0)));
    CHECK_FALSE(passes_filter(constant(5.0, 10.0)));
    CHECK_FALSE(passes_filter(synthesize_trace(SyntheticKind::square_wave, dip, 10.0, 1)));
    CHECK_FALSE(passes_filter(constant(3.0, 10.0)));
    CHECK_FALSE(passes_filter(constant(0.2, 10.0)));
}

TEST_CASE("filter is idempotent") {
    std::vector<LinkTrace> traces = synthetic_corpus(10, 20.0, 4);
    traces.push_back(constant(4.0, 10.0));
    traces.push_back(constant(0.1, 10.0));
    const auto once = filter_corpus(traces);
    const auto twice = filter_corpus(once);
    CHECK(once.size() == 10);
    REQUIRE(twice.size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].source_tag == twice[i].source_tag);
}

TEST_CASE("split sizes, determinism and partition") {
    const auto corpus = synthetic_corpus(10, 10.0, 5);
    const auto s = split_corpus(corpus, 0.8, 42);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    const auto again = split_corpus(corpus, 0.8, 42);
    for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(s.train[i].source_tag == again.train[i].source_tag);

    std::set<std::string> seen;
    for (const auto& t : s.train) seen.insert(t.source_tag);
    for (const auto& t : s.test) seen.insert(t.source_tag);
    CHECK(seen.size() == 10);

    const auto one = split_corpus({corpus[0]}, 0.8, 1);
    CHECK(one.train.empty());
    CHECK(one.test.size() == 1);
    CHECK_THROWS_AS(split_corpus(corpus, 1.0, 1), ConfigError);
}

TEST_CASE("synthetic traces") {
    const LinkTrace c = constant(1.0, 10.0);
    REQUIRE(c.samples.size() == 10);
    for (const auto& s : c.samples) CHECK(s.capacity_bps == mbps_to_bytes_per_s(1.0));

    SyntheticParams sq;
    sq.low_mbps = 0.5;
    sq.high_mbps = 2.5;
    sq.period_s = 2.0;
    const LinkTrace w = synthesize_trace(SyntheticKind::square_wave, sq, 10.0, 1);
    REQUIRE(w.samples.size() == 10);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        CHECK(w.samples[i].capacity_bps == mbps_to_bytes_per_s(i % 2 == 0 ? 0.5 : 2.5));
    }

    SyntheticParams r;
    r.start_mbps = 0.3;
    r.end_mbps = 2.8;
    const LinkTrace ramp = synthesize_trace(SyntheticKind::ramp, r, 100.0, 1);
    REQUIRE(ramp.samples.size() == 100);
    CHECK(ramp.samples.front().capacity_bps == doctest::Approx(mbps_to_bytes_per_s(0.3)));
    CHECK(ramp.samples.back().capacity_bps == doctest::Approx(mbps_to_bytes_per_s(2.8)));
    const double step = ramp.samples[1].capacity_bps - ramp.samples[0].capacity_bps;
    for (std::size_t i = 1; i < ramp.samples.size(); ++i) {
        CHECK(ramp.samples[i].capacity_bps - ramp.samples[i - 1].capacity_bps == doctest::Approx(step));
    }

    CHECK_THROWS_AS(synthesize_trace(SyntheticKind::constant, {}, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(parse_synthetic_kind("sawtooth"), ConfigError);
    CHECK(parse_synthetic_kind("ramp") == SyntheticKind::ramp);
}

TEST_CASE("bundled synthetic corpus sits inside the filter band") {
    const auto corpus = synthetic_corpus(20, 60.0, 2024);
    CHECK(corpus.size() == 20);
    CHECK(filter_corpus(corpus).size() == 20);
    CHECK(corpus[0].source_tag == "synthetic_00_square");
    CHECK(corpus[1].source_tag == "synthetic_01_ramp");
}

TEST_CASE("concatenation shifts later traces") {
    const LinkTrace a = from_csv("0,1\n1,2\n");
    const LinkTrace b = from_csv("0,3\n");
    const std::vector<LinkTrace> both{a, b};
    const LinkTrace c = concatenate_traces(both, "ab");
    REQUIRE(c.samples.size() == 3);
    CHECK(c.samples[2].time == 2.0);
    CHECK(c.samples[2].capacity_bps == mbps_to_bytes_per_s(3.0));
    CHECK(c.duration == 3.0);
    CHECK_THROWS_AS(concatenate_traces({}, "none"), ConfigError);
}
