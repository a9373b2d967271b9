#include "dpsched/trace_io.hpp"

#include "dpsched/core_model.hpp"
#include "dpsched/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>

namespace dpsched {

double LinkTrace::mean_bps() const {
    if (samples.empty() || !(duration > 0.0)) return 0.0;
    double area = samples.front().capacity_bps * samples.front().time;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double end = i + 1 < samples.size() ? samples[i + 1].time : duration;
        area += samples[i].capacity_bps * (end - samples[i].time);
    }
    return area / duration;
}

double LinkTrace::min_bps() const {
    double m = samples.empty() ? 0.0 : samples.front().capacity_bps;
    for (const auto& s : samples) m = std::min(m, s.capacity_bps);
    return m;
}

double LinkTrace::max_bps() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.capacity_bps);
    return m;
}

void LinkTrace::validate() const {
    if (samples.empty()) throw ConfigError("trace '" + source_tag + "' is empty");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].capacity_bps >= 0.0)) throw ConfigError("trace '" + source_tag + "' has negative capacity");
        if (samples[i].time < 0.0) throw ConfigError("trace '" + source_tag + "' has a negative timestamp");
        if (i > 0 && !(samples[i].time > samples[i - 1].time)) {
            throw ConfigError("trace '" + source_tag + "' timestamps must be strictly increasing");
        }
    }
    if (!(duration > samples.back().time)) {
        throw ConfigError("trace '" + source_tag + "' duration does not cover its last sample");
    }
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
    if (token.empty()) return false;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Shortest decimal Mbps value that maps back onto exactly `bps`.
std::string format_mbps(double bps) {
    double mbps = bps / kBytesPerMbps;
    for (double candidate : {mbps, std::nextafter(mbps, INFINITY), std::nextafter(mbps, -INFINITY)}) {
        if (candidate * kBytesPerMbps == bps) {
            mbps = candidate;
            break;
        }
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, mbps);
    return std::string(buf, ptr);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

LinkTrace parse_packet_opportunity_trace(std::istream& in, const std::string& source, double bucket_s) {
    if (!(bucket_s > 0.0)) throw ConfigError("bucket width must be > 0");
    const auto bucket_ms = static_cast<std::uint64_t>(std::llround(bucket_s * 1000.0));
    if (bucket_ms == 0) throw ConfigError("bucket width must be at least 1 ms");

    std::map<std::uint64_t, std::uint64_t> counts;
    std::string line;
    std::size_t line_no = 0;
    std::uint64_t previous = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto token = trim(line);
        if (token.empty()) continue;
        std::uint64_t ms = 0;
        if (!parse_number(token, ms)) {
            throw ParseError(source, line_no, "expected an integer millisecond timestamp, got '" + std::string(token) + "'");
        }
        if (any && ms < previous) {
            throw ParseError(source, line_no, "timestamp " + std::to_string(ms) + " is smaller than the previous one");
        }
        previous = ms;
        any = true;
        ++counts[ms / bucket_ms];
    }
    if (!any) throw ParseError(source, line_no, "trace contains no delivery opportunities");

    LinkTrace trace;
    trace.source_tag = source;
    const std::uint64_t last_bucket = counts.rbegin()->first;
    for (std::uint64_t b = 0; b <= last_bucket; ++b) {
        const auto it = counts.find(b);
        const double n = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        trace.samples.push_back({static_cast<double>(b) * bucket_s, n * static_cast<double>(kPacketPayload) / bucket_s});
    }
    trace.duration = static_cast<double>(last_bucket + 1) * bucket_s;
    trace.validate();
    return trace;
}

LinkTrace parse_csv_trace(std::istream& in, const std::string& source) {
    LinkTrace trace;
    trace.source_tag = source;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) throw ParseError(source, line_no, "expected 'timestamp_s,throughput_mbps'");
        double t = 0.0;
        double mbps = 0.0;
        if (!parse_number(trim(text.substr(0, comma)), t)) throw ParseError(source, line_no, "bad timestamp");
        if (!parse_number(trim(text.substr(comma + 1)), mbps)) throw ParseError(source, line_no, "bad throughput");
        if (!std::isfinite(t) || t < 0.0) throw ParseError(source, line_no, "timestamp must be finite and >= 0");
        if (!std::isfinite(mbps) || mbps < 0.0) throw ParseError(source, line_no, "throughput must be finite and >= 0");
        if (!trace.samples.empty() && !(t > trace.samples.back().time)) {
            throw ParseError(source, line_no, "timestamps must be strictly increasing");
        }
        trace.samples.push_back({t, mbps_to_bytes_per_s(mbps)});
    }
    if (trace.samples.empty()) throw ParseError(source, line_no, "trace contains no samples");
    const auto n = trace.samples.size();
    const double last_gap = n > 1 ? trace.samples[n - 1].time - trace.samples[n - 2].time : 1.0;
    trace.duration = trace.samples.back().time + last_gap;
    trace.validate();
    return trace;
}

LinkTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file " + path.string());
    LinkTrace trace = path.extension() == ".csv" ? parse_csv_trace(in, path.string())
                                                 : parse_packet_opportunity_trace(in, path.string());
    trace.source_tag = path.filename().string();
    return trace;
}

void write_csv_trace(std::ostream& out, const LinkTrace& trace) {
    for (const auto& s : trace.samples) {
        out << format_double(s.time) << ',' << format_mbps(s.capacity_bps) << '\n';
    }
}

void write_packet_opportunity_trace(std::ostream& out, const LinkTrace& trace, double bucket_s) {
    trace.validate();
    const auto buckets = static_cast<std::uint64_t>(std::ceil(trace.duration / bucket_s - 1e-9));
    const auto bucket_ms = static_cast<std::uint64_t>(std::llround(bucket_s * 1000.0));
    std::size_t sample = 0;
    for (std::uint64_t b = 0; b < buckets; ++b) {
        const double t = static_cast<double>(b) * bucket_s;
        while (sample + 1 < trace.samples.size() && trace.samples[sample + 1].time <= t) ++sample;
        const double bytes = trace.samples[sample].capacity_bps * bucket_s;
        const auto count = static_cast<std::uint64_t>(std::llround(bytes / static_cast<double>(kPacketPayload)));
        for (std::uint64_t j = 0; j < count; ++j) {
            out << b * bucket_ms + (j * bucket_ms) / count << '\n';
        }
    }
}

void save_trace(const std::filesystem::path& path, const LinkTrace& trace) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trace file " + path.string());
    if (path.extension() == ".csv") {
        write_csv_trace(out, trace);
    } else {
        write_packet_opportunity_trace(out, trace);
    }
}

bool passes_filter(const LinkTrace& trace, const CorpusFilter& filter) {
    return trace.mean_bps() < mbps_to_bytes_per_s(filter.max_mean_mbps) &&
           trace.min_bps() > mbps_to_bytes_per_s(filter.min_floor_mbps);
}

std::vector<LinkTrace> filter_corpus(const std::vector<LinkTrace>& traces, const CorpusFilter& filter) {
    std::vector<LinkTrace> kept;
    std::copy_if(traces.begin(), traces.end(), std::back_inserter(kept),
                 [&](const LinkTrace& t) { return passes_filter(t, filter); });
    return kept;
}

CorpusSplit split_corpus(const std::vector<LinkTrace>& traces, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(traces.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own index draw so the split does not depend on
    // the standard library's shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(traces.size()) * train_fraction));
    CorpusSplit split;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? split.train : split.test).push_back(traces[order[i]]);
    }
    return split;
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "constant") return SyntheticKind::constant;
    if (name == "square_wave" || name == "square") return SyntheticKind::square_wave;
    if (name == "ramp") return SyntheticKind::ramp;
    throw ConfigError("unknown synthetic trace kind '" + name + "' (expected constant, square_wave or ramp)");
}

LinkTrace synthesize_trace(SyntheticKind kind, const SyntheticParams& params, double duration, std::uint64_t seed) {
    if (!(duration > 0.0)) throw ConfigError("synthetic trace duration must be > 0");
    if (!(params.noise >= 0.0 && params.noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    LinkTrace trace;
    trace.duration = duration;

    auto add = [&](double t, double mbps) {
        double v = mbps;
        if (params.noise > 0.0) v *= uniform(rng, 1.0 - params.noise, 1.0 + params.noise);
        trace.samples.push_back({t, mbps_to_bytes_per_s(v)});
    };

    switch (kind) {
        case SyntheticKind::constant: {
            if (!(params.rate_mbps >= 0.0) || !(params.sample_interval_s > 0.0)) {
                throw ConfigError("constant trace needs rate >= 0 and interval > 0");
            }
            for (int i = 0; i * params.sample_interval_s < duration; ++i) add(i * params.sample_interval_s, params.rate_mbps);
            trace.source_tag = "constant_" + format_double(params.rate_mbps) + "mbps";
            break;
        }
        case SyntheticKind::square_wave: {
            if (!(params.low_mbps >= 0.0 && params.high_mbps >= 0.0) || !(params.period_s > 0.0)) {
                throw ConfigError("square wave needs non-negative levels and period > 0");
            }
            const double half = params.period_s / 2.0;
            for (int i = 0; i * half < duration; ++i) add(i * half, i % 2 == 0 ? params.low_mbps : params.high_mbps);
            trace.source_tag = "square_" + format_double(params.low_mbps) + "_" + format_double(params.high_mbps) +
                               "_p" + format_double(params.period_s);
            break;
        }
        case SyntheticKind::ramp: {
            if (!(params.start_mbps >= 0.0 && params.end_mbps >= 0.0) || !(params.sample_interval_s > 0.0)) {
                throw ConfigError("ramp needs non-negative endpoints and interval > 0");
            }
            int n = 0;
            while (n * params.sample_interval_s < duration) ++n;
            for (int i = 0; i < n; ++i) {
                const double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
                add(i * params.sample_interval_s, params.start_mbps + (params.end_mbps - params.start_mbps) * frac);
            }
            trace.source_tag = "ramp_" + format_double(params.start_mbps) + "_" + format_double(params.end_mbps);
            break;
        }
    }
    trace.validate();
    return trace;
}

std::vector<LinkTrace> synthetic_corpus(std::size_t count, double duration, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LinkTrace> corpus;
    for (std::size_t i = 0; i < count; ++i) {
        SyntheticParams p;
        p.noise = 0.1;
        const std::uint64_t trace_seed = rng();
        LinkTrace t;
        std::string kind;
        if (i % 2 == 0) {
            p.low_mbps = uniform(rng, 0.3, 0.7);
            p.high_mbps = uniform(rng, 1.6, 2.6);
            p.period_s = 2.0 * static_cast<double>(1 + rng() % 5);
            t = synthesize_trace(SyntheticKind::square_wave, p, duration, trace_seed);
            kind = "square";
        } else {
            const double lo = uniform(rng, 0.3, 0.8);
            const double hi = uniform(rng, 1.8, 2.6);
            const bool rising = (i / 2) % 2 == 0;
            p.start_mbps = rising ? lo : hi;
            p.end_mbps = rising ? hi : lo;
            t = synthesize_trace(SyntheticKind::ramp, p, duration, trace_seed);
            kind = "ramp";
        }
        char name[64];
        std::snprintf(name, sizeof name, "synthetic_%02zu_%s", i, kind.c_str());
        t.source_tag = name;
        corpus.push_back(std::move(t));
    }
    return corpus;
}

LinkTrace concatenate_traces(std::span<const LinkTrace> traces, const std::string& tag) {
    if (traces.empty()) throw ConfigError("nothing to concatenate");
    LinkTrace out;
    out.source_tag = tag;
    double offset = 0.0;
    for (const auto& t : traces) {
        t.validate();
        for (std::size_t i = 0; i < t.samples.size(); ++i) {
            // The first sample also covers any gap before its timestamp.
            const double time = i == 0 ? offset : offset + t.samples[i].time;
            out.samples.push_back({time, t.samples[i].capacity_bps});
        }
        offset += t.duration;
    }
    out.duration = offset;
    out.validate();
    return out;
}

std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("corpus directory " + dir.string() + " does not exist");
    static const std::set<std::string> accepted = {".csv", ".trace", ".up", ".down", ".mahi", ""};
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.empty() || name.front() == '.') continue;
        if (!accepted.count(entry.path().extension().string())) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<LinkTrace> load_corpus(const std::filesystem::path& dir) {
    std::vector<LinkTrace> traces;
    for (const auto& path : list_trace_files(dir)) traces.push_back(load_trace(path));
    return traces;
}

}  // namespace dpsched
