#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ocel/bytes.hpp"
#include "ocel/format.hpp"
#include "ocel/stream.hpp"

namespace ocel {

// Shape of a synthetic log. Generation is a pure function of this struct:
// the same spec always produces the same records and the same bytes.
struct GenSpec {
    std::uint64_t seed = 1;
    std::uint64_t n_events = 1000;
    std::uint32_t n_object_types = 3;
    std::uint32_t objects_per_type = 100;
    // Uniform omap size per event, inclusive bounds.
    std::uint32_t omap_min = 1;
    std::uint32_t omap_max = 4;
    std::uint32_t activities_per_type = 5;
    // Timestamps spread evenly over [base, base + span]; every 97th event
    // reuses its predecessor's timestamp so order ties exist.
    std::int64_t span_micros = 30ll * 24 * 3600 * 1000000;
    std::uint32_t vmap_attributes = 2;
};

struct GenStats {
    std::uint64_t events = 0;
    std::uint64_t objects = 0;
    std::uint64_t postings = 0; // sum of omap sizes
    std::uint64_t bytes = 0;    // serialized size

    bool operator==(const GenStats&) const = default;
};

// Streaming source of the synthetic log: objects first (type-major), then
// events in (timestamp, id) order. O(1) memory in n_events.
//
// Each object walks a per-type random transition matrix over that type's
// activities, so the directly-follows graphs have structure instead of
// uniform noise. Every omap entry names an emitted object.
//
// Errors: ConfigError for an inconsistent spec (zero counts, omap_min >
// omap_max, or omap_max larger than the object population).
std::unique_ptr<RecordStream> generator_stream(const GenSpec& spec);

// Serializes the synthetic log to `sink`. `format` must name a concrete
// serialization (not Auto).
GenStats generate(const GenSpec& spec, ByteSink& sink, LogFormat format);

// One benchmark measurement: generate -> ingest -> full multi-DFG.
struct BenchRow {
    std::uint64_t size = 0; // n_events of this run
    bool ok = false;
    std::string error; // failure marker, empty when ok

    double ingest_s = 0;
    std::uint64_t json_bytes = 0;
    std::uint64_t segment_bytes = 0;
    std::uint64_t index_bytes = 0;
    double mdfg_s = 0;
    std::uint64_t agg_highwater_bytes = 0;
    std::uint64_t spill_bytes = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

struct BenchOptions {
    // Template for every size; n_events is overridden per run.
    GenSpec spec;
    // Working-memory budget handed to both ingest and the aggregation.
    std::size_t budget_bytes = 256ull << 20;
    // Where generated logs and stores are placed. Empty means a fresh
    // directory under the system temp dir, removed afterwards.
    std::filesystem::path work_dir;
    // Keep per-size artifacts (log file, store) instead of deleting them.
    bool keep_artifacts = false;
    // Threads for spilled aggregation partitions (1 = fully sequential).
    std::size_t workers = 1;
    // Called after each size finishes (progress reporting).
    std::function<void(const BenchRow&)> on_row;
};

// Runs the pipeline for each size in ascending order. A failing size is
// recorded with its error and the remaining sizes still run.
//
// Errors: ConfigError if sizes are not strictly ascending or the template
// spec is invalid; IoError if the work directory cannot be created.
BenchReport run_bench(const std::vector<std::uint64_t>& sizes,
                      const BenchOptions& options);

// CSV with the exact header
// size,ingest_s,json_bytes,segment_bytes,index_bytes,mdfg_s,agg_highwater_bytes,spill_bytes
// and one line per successful row (failed sizes carry no numbers).
std::string bench_report_csv(const BenchReport& report);

// Aligned human-readable table, failures marked.
std::string bench_report_table(const BenchReport& report);

} // namespace ocel
