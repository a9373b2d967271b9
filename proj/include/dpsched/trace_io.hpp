#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dpsched {

struct TraceSample {
    double time = 0.0;          // seconds
    double capacity_bps = 0.0;  // bytes/s
};

// Piecewise-constant link capacity. Sample i holds from its timestamp up to
// the next one; the last sample holds until `duration`.
struct LinkTrace {
    std::vector<TraceSample> samples;
    double duration = 0.0;
    std::string source_tag;

    // Time-weighted mean over [0, duration). The first sample also covers
    // any gap before its timestamp.
    double mean_bps() const;
    double min_bps() const;
    double max_bps() const;

    // Throws ConfigError on empty traces, negative capacity, non-increasing
    // timestamps or a duration that does not cover the last sample.
    void validate() const;
};

inline constexpr double kDefaultBucketSeconds = 1.0;

// Packet-opportunity format: one integer millisecond timestamp per line,
// each granting one 1500-byte delivery opportunity. Opportunities are
// bucketed into capacity samples of `bucket_s` seconds.
LinkTrace parse_packet_opportunity_trace(std::istream& in, const std::string& source = "<trace>",
                                         double bucket_s = kDefaultBucketSeconds);

// "timestamp_s,throughput_mbps" per line. Blank lines and lines starting
// with '#' are skipped.
LinkTrace parse_csv_trace(std::istream& in, const std::string& source = "<trace>");

// Picks the parser by extension: .csv is CSV, anything else is the
// packet-opportunity format.
LinkTrace load_trace(const std::filesystem::path& path);

void write_csv_trace(std::ostream& out, const LinkTrace& trace);
// Emits evenly spaced opportunities per bucket (capacity rounded to whole
// packets per bucket).
void write_packet_opportunity_trace(std::ostream& out, const LinkTrace& trace,
                                    double bucket_s = kDefaultBucketSeconds);
void save_trace(const std::filesystem::path& path, const LinkTrace& trace);

struct CorpusFilter {
    double max_mean_mbps = 3.0;   // keep mean < this
    double min_floor_mbps = 0.2;  // keep min > this
};

bool passes_filter(const LinkTrace& trace, const CorpusFilter& filter = {});
std::vector<LinkTrace> filter_corpus(const std::vector<LinkTrace>& traces, const CorpusFilter& filter = {});

struct CorpusSplit {
    std::vector<LinkTrace> train;
    std::vector<LinkTrace> test;
};

// Seeded shuffle, then the first floor(n * train_fraction) go to train.
CorpusSplit split_corpus(const std::vector<LinkTrace>& traces, double train_fraction, std::uint64_t seed);

enum class SyntheticKind { constant, square_wave, ramp };

SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticParams {
    double rate_mbps = 1.0;   // constant
    double low_mbps = 0.5;    // square_wave
    double high_mbps = 2.5;   // square_wave
    double period_s = 2.0;    // square_wave: low for period/2, then high
    double start_mbps = 0.3;  // ramp
    double end_mbps = 2.8;    // ramp
    double sample_interval_s = 1.0;  // constant, ramp
    // Multiplicative per-sample noise, uniform in [1 - noise, 1 + noise].
    double noise = 0.0;
};

LinkTrace synthesize_trace(SyntheticKind kind, const SyntheticParams& params, double duration, std::uint64_t seed);

// Half square waves, half ramps (alternating), every trace inside the
// default corpus filter band.
std::vector<LinkTrace> synthetic_corpus(std::size_t count, double duration, std::uint64_t seed);

// Back-to-back concatenation, each trace shifted by the durations before it.
LinkTrace concatenate_traces(std::span<const LinkTrace> traces, const std::string& tag);

// Trace files in a directory, sorted by name.
std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir);
std::vector<LinkTrace> load_corpus(const std::filesystem::path& dir);

}  // namespace dpsched
