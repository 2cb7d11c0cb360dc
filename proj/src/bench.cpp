#include "ocel/bench.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <random>
#include <utility>

#include "ocel/errors.hpp"
#include "ocel/mining.hpp"
#include "ocel/store.hpp"

namespace fs = std::filesystem;

namespace ocel {

namespace {

// All sampling below uses raw mt19937_64 draws with modulo or bit tricks.
// The std <random> distributions are implementation-defined, which would
// break the byte-identical-output promise across standard libraries.

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

double draw_unit(std::mt19937_64& rng) {
    // 53 uniform bits -> [0, 1) with exact round-trip through any of the
    // serializations.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_spec(const GenSpec& spec) {
    if (spec.n_object_types < 1 || spec.objects_per_type < 1 ||
        spec.activities_per_type < 1)
        throw ConfigError("generator spec: type, object and activity counts "
                          "must be at least 1");
    if (spec.omap_min < 1 || spec.omap_min > spec.omap_max)
        throw ConfigError("generator spec: omap size bounds must satisfy "
                          "1 <= min <= max");
    const std::uint64_t population =
        std::uint64_t{spec.n_object_types} * spec.objects_per_type;
    if (spec.omap_max > population)
        throw ConfigError("generator spec: omap_max exceeds the object "
                          "population (" + std::to_string(population) + ")");
    if (spec.span_micros < 0)
        throw ConfigError("generator spec: timestamp span must not be negative");
}

// 2024-01-01T00:00:00Z
constexpr std::int64_t kBaseMicros = 1704067200ll * 1000000;

class GeneratorStream final : public RecordStream {
public:
    explicit GeneratorStream(const GenSpec& spec) : spec_(spec) {
        check_spec(spec);
        const std::uint32_t t_count = spec.n_object_types;
        const std::uint32_t a_count = spec.activities_per_type;

        std::mt19937_64 setup(spec.seed);
        type_names_.reserve(t_count);
        act_names_.resize(t_count);
        succ_.resize(t_count);
        char buf[48];
        for (std::uint32_t t = 0; t < t_count; ++t) {
            std::snprintf(buf, sizeof buf, "t%02u", t);
            type_names_.push_back(buf);
            act_names_[t].reserve(a_count);
            for (std::uint32_t a = 0; a < a_count; ++a) {
                std::snprintf(buf, sizeof buf, "%s_a%02u",
                              type_names_[t].c_str(), a);
                act_names_[t].push_back(buf);
            }
            // Sparse successor lists make the walks repeat recognizable
            // paths instead of jumping uniformly.
            succ_[t].resize(a_count);
            for (std::uint32_t s = 0; s < a_count; ++s) {
                const std::uint32_t fanout = static_cast<std::uint32_t>(
                    1 + draw(setup, std::min<std::uint32_t>(3, a_count)));
                auto& row = succ_[t][s];
                for (std::uint32_t k = 0; k < fanout; ++k) {
                    std::uint32_t cand = 0;
                    bool found = false;
                    for (int attempt = 0; attempt < 16 && !found; ++attempt) {
                        cand = static_cast<std::uint32_t>(draw(setup, a_count));
                        found = std::find(row.begin(), row.end(), cand) ==
                                row.end();
                    }
                    if (found) row.push_back(cand);
                }
                if (row.empty()) row.push_back((s + 1) % a_count);
            }
        }

        meta_.version = "1.0";
        meta_.ordering = "timestamp";
        meta_.object_types.insert(type_names_.begin(), type_names_.end());
        meta_.attribute_names.insert("idx");
        for (std::uint32_t j = 0; j < spec.vmap_attributes; ++j) {
            std::snprintf(buf, sizeof buf, "f%02u", j);
            meta_.attribute_names.insert(buf);
        }
        meta_.global_event.emplace("activity",
                                   AttributeValue(std::string("__INVALID__")));
        meta_.global_object.emplace("type",
                                    AttributeValue(std::string("__INVALID__")));

        rng_.seed(spec.seed ^ 0x9e3779b97f4a7c15ull);
        state_.assign(std::size_t{t_count} * spec.objects_per_type, -1);
        mru_.assign(t_count, 0);
        has_mru_.assign(t_count, 0);
    }

    const LogMetadata& metadata() override { return meta_; }

    bool next(LogRecord& out) override {
        const std::uint64_t k = spec_.objects_per_type;
        if (next_object_ < std::uint64_t{spec_.n_object_types} * k) {
            const std::uint32_t t = static_cast<std::uint32_t>(next_object_ / k);
            const std::uint32_t o = static_cast<std::uint32_t>(next_object_ % k);
            ObjectRecord obj;
            obj.id = object_id(t, o);
            obj.otype = type_names_[t];
            obj.ovmap.emplace(
                "idx", AttributeValue(static_cast<std::int64_t>(next_object_)));
            ++next_object_;
            out = std::move(obj);
            return true;
        }
        if (next_event_ >= spec_.n_events) return false;
        out = make_event(next_event_++);
        return true;
    }

    std::uint64_t postings() const { return postings_; }
    std::uint64_t object_count() const {
        return std::uint64_t{spec_.n_object_types} * spec_.objects_per_type;
    }

private:
    std::string object_id(std::uint32_t t, std::uint32_t o) const {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%s_o%06u", type_names_[t].c_str(), o);
        return buf;
    }

    EventRecord make_event(std::uint64_t i) {
        const std::uint32_t t_count = spec_.n_object_types;
        const std::uint32_t k_count = spec_.objects_per_type;
        EventRecord ev;
        char buf[48];
        std::snprintf(buf, sizeof buf, "e%08llu",
                      static_cast<unsigned long long>(i));
        ev.id = buf;

        // Chained primary object: mostly continue the type's most recent
        // object so lifecycles are runs, not shuffles.
        const auto t = static_cast<std::uint32_t>(draw(rng_, t_count));
        const bool reuse = has_mru_[t] != 0 && draw(rng_, 10) < 7;
        const auto o = reuse ? mru_[t]
                             : static_cast<std::uint32_t>(draw(rng_, k_count));
        mru_[t] = o;
        has_mru_[t] = 1;

        auto& state = state_[std::size_t{t} * k_count + o];
        const auto a_count = spec_.activities_per_type;
        if (state < 0) {
            state = static_cast<std::int32_t>(draw(rng_, a_count));
        } else {
            const auto& row = succ_[t][static_cast<std::uint32_t>(state)];
            state = static_cast<std::int32_t>(row[draw(rng_, row.size())]);
        }
        ev.activity = act_names_[t][static_cast<std::uint32_t>(state)];

        // Even spread over the span, with a deliberate tie every 97 events.
        if (i % 97 == 96 && i > 0) {
            ev.timestamp = Timestamp{prev_ts_};
        } else if (spec_.n_events > 1) {
            const auto scaled = static_cast<unsigned __int128>(
                                    spec_.span_micros) * i /
                                (spec_.n_events - 1);
            ev.timestamp =
                Timestamp{kBaseMicros + static_cast<std::int64_t>(scaled)};
        } else {
            ev.timestamp = Timestamp{kBaseMicros};
        }
        prev_ts_ = ev.timestamp.micros;

        const std::uint32_t want =
            spec_.omap_min +
            (spec_.omap_max > spec_.omap_min
                 ? static_cast<std::uint32_t>(
                       draw(rng_, spec_.omap_max - spec_.omap_min + 1))
                 : 0);
        ev.omap.push_back(object_id(t, o));
        while (ev.omap.size() < want) {
            std::string cand;
            bool found = false;
            for (int attempt = 0; attempt < 32 && !found; ++attempt) {
                const auto u = static_cast<std::uint32_t>(draw(rng_, t_count));
                const auto v = static_cast<std::uint32_t>(draw(rng_, k_count));
                cand = object_id(u, v);
                found = std::find(ev.omap.begin(), ev.omap.end(), cand) ==
                        ev.omap.end();
            }
            if (!found) {
                // Tiny population: scan from a random point for an id not
                // yet in the omap (the population check guarantees one).
                std::uint64_t g = draw(rng_, std::uint64_t{t_count} * k_count);
                for (;;) {
                    cand = object_id(static_cast<std::uint32_t>(g / k_count),
                                     static_cast<std::uint32_t>(g % k_count));
                    if (std::find(ev.omap.begin(), ev.omap.end(), cand) ==
                        ev.omap.end())
                        break;
                    g = (g + 1) % (std::uint64_t{t_count} * k_count);
                }
            }
            ev.omap.push_back(std::move(cand));
        }
        postings_ += ev.omap.size();

        for (std::uint32_t j = 0; j < spec_.vmap_attributes; ++j) {
            std::snprintf(buf, sizeof buf, "f%02u", j);
            switch (j % 4) {
            case 0:
                ev.vmap.emplace(buf, AttributeValue("s" + std::to_string(
                                                              draw(rng_, 8))));
                break;
            case 1:
                ev.vmap.emplace(buf, AttributeValue(draw_unit(rng_)));
                break;
            case 2:
                ev.vmap.emplace(buf, AttributeValue(static_cast<std::int64_t>(
                                         draw(rng_, 1000000))));
                break;
            default:
                ev.vmap.emplace(buf, AttributeValue((rng_() & 1) != 0));
                break;
            }
        }
        return ev;
    }

    GenSpec spec_;
    LogMetadata meta_;
    std::vector<std::string> type_names_;
    std::vector<std::vector<std::string>> act_names_;
    std::vector<std::vector<std::vector<std::uint32_t>>> succ_;
    std::mt19937_64 rng_;
    std::vector<std::int32_t> state_; // -1 = not started
    std::vector<std::uint32_t> mru_;
    std::vector<std::uint8_t> has_mru_;
    std::uint64_t next_object_ = 0;
    std::uint64_t next_event_ = 0;
    std::uint64_t postings_ = 0;
    std::int64_t prev_ts_ = kBaseMicros;
};

class CountingSink final : public ByteSink {
public:
    explicit CountingSink(ByteSink& inner) : inner_(inner) {}
    void write(const char* data, std::size_t n) override {
        inner_.write(data, n);
        bytes_ += n;
    }
    void flush() override { inner_.flush(); }
    std::uint64_t bytes() const { return bytes_; }

private:
    ByteSink& inner_;
    std::uint64_t bytes_ = 0;
};

} // namespace

std::unique_ptr<RecordStream> generator_stream(const GenSpec& spec) {
    return std::make_unique<GeneratorStream>(spec);
}

GenStats generate(const GenSpec& spec, ByteSink& sink, LogFormat format) {
    if (format == LogFormat::Auto)
        throw ConfigError("generate needs a concrete format (json or xml)");
    GeneratorStream stream(spec);
    CountingSink counting(sink);
    write_log_to(stream, counting, format);
    counting.flush();
    GenStats stats;
    stats.events = spec.n_events;
    stats.objects = stream.object_count();
    stats.postings = stream.postings();
    stats.bytes = counting.bytes();
    return stats;
}

// --- harness ---------------------------------------------------------------

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void append_fixed(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
}

} // namespace

BenchReport run_bench(const std::vector<std::uint64_t>& sizes,
                      const BenchOptions& options) {
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw ConfigError("bench sizes must be strictly ascending");
    check_spec(options.spec);

    fs::path work = options.work_dir;
    bool owned = false;
    if (work.empty()) {
        static std::atomic<unsigned> counter{0};
        work = fs::temp_directory_path() /
               ("ocel-bench-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        owned = true;
    }
    std::error_code ec;
    fs::create_directories(work, ec);
    if (ec) throw IoError("cannot create bench directory " + work.string());

    BenchReport report;
    for (const std::uint64_t size : sizes) {
        BenchRow row;
        row.size = size;
        const fs::path log_path =
            work / ("gen-" + std::to_string(size) + ".json");
        const fs::path store_dir = work / ("store-" + std::to_string(size));
        try {
            GenSpec spec = options.spec;
            spec.n_events = size;
            {
                auto sink = open_file_sink(log_path.string());
                row.json_bytes = generate(spec, *sink, LogFormat::Json).bytes;
            }

            {
                StoreOptions store_opts;
                store_opts.memory_budget = options.budget_bytes;
                auto t0 = std::chrono::steady_clock::now();
                auto store = Store::create(store_dir.string(), store_opts);
                auto input = open_log_stream(log_path.string());
                const IngestStats stats = store->ingest(*input);
                row.ingest_s = seconds_since(t0);
                row.segment_bytes = stats.segment_bytes;
                row.index_bytes = stats.index_bytes;

                t0 = std::chrono::steady_clock::now();
                const Mdfg graph = mdfg_all(*store, options.budget_bytes, {},
                                            options.workers);
                row.mdfg_s = seconds_since(t0);
                row.agg_highwater_bytes = graph.agg_metrics.high_water_bytes;
                row.spill_bytes = graph.agg_metrics.spill_bytes;
                row.ok = true;
            }
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        if (!options.keep_artifacts) {
            fs::remove(log_path, ec);
            fs::remove_all(store_dir, ec);
        }
        report.rows.push_back(row);
        if (options.on_row) options.on_row(report.rows.back());
    }

    if (owned && !options.keep_artifacts) fs::remove_all(work, ec);
    return report;
}

std::string bench_report_csv(const BenchReport& report) {
    std::string out = "size,ingest_s,json_bytes,segment_bytes,index_bytes,"
                      "mdfg_s,agg_highwater_bytes,spill_bytes\n";
    for (const BenchRow& r : report.rows) {
        if (!r.ok) continue;
        out += std::to_string(r.size);
        out += ',';
        append_fixed(out, r.ingest_s);
        out += ',';
        out += std::to_string(r.json_bytes);
        out += ',';
        out += std::to_string(r.segment_bytes);
        out += ',';
        out += std::to_string(r.index_bytes);
        out += ',';
        append_fixed(out, r.mdfg_s);
        out += ',';
        out += std::to_string(r.agg_highwater_bytes);
        out += ',';
        out += std::to_string(r.spill_bytes);
        out += '\n';
    }
    return out;
}

std::string bench_report_table(const BenchReport& report) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%10s %9s %9s %9s %9s %8s %12s %9s\n",
                  "size", "ingest_s", "json_MB", "seg_MB", "idx_MB", "mdfg_s",
                  "agg_peak_KB", "spill_MB");
    out += line;
    for (const BenchRow& r : report.rows) {
        if (!r.ok) {
            std::snprintf(line, sizeof line, "%10llu FAILED: %.120s\n",
                          static_cast<unsigned long long>(r.size),
                          r.error.c_str());
            out += line;
            continue;
        }
        std::snprintf(line, sizeof line,
                      "%10llu %9.2f %9.2f %9.2f %9.2f %8.2f %12.1f %9.2f\n",
                      static_cast<unsigned long long>(r.size), r.ingest_s,
                      r.json_bytes / 1e6, r.segment_bytes / 1e6,
                      r.index_bytes / 1e6, r.mdfg_s,
                      r.agg_highwater_bytes / 1e3, r.spill_bytes / 1e6);
        out += line;
    }
    return out;
}

} // namespace ocel
