// ocelstore: command-line front end for the embedded OCEL store.
//
// Machine-readable results go to stdout; progress and diagnostics go to
// stderr. Exit codes: 0 success, 1 usage or configuration, 2 bad data,
// 3 I/O failure.

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ocel/agg.hpp"
#include "ocel/bench.hpp"
#include "ocel/errors.hpp"
#include "ocel/format.hpp"
#include "ocel/mining.hpp"
#include "ocel/store.hpp"

namespace {

// "123", "64KiB", "2MiB", "1GiB" -> bytes.
std::size_t parse_budget(const std::string& text) {
    std::size_t digits = 0;
    while (digits < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[digits])))
        ++digits;
    if (digits == 0)
        throw ocel::ConfigError("budget '" + text + "' must start with digits");
    const std::string suffix = text.substr(digits);
    std::size_t unit = 1;
    if (suffix == "KiB")
        unit = 1024;
    else if (suffix == "MiB")
        unit = 1024 * 1024;
    else if (suffix == "GiB")
        unit = 1024ull * 1024 * 1024;
    else if (!suffix.empty())
        throw ocel::ConfigError("budget '" + text +
                                "': unknown unit (use KiB, MiB or GiB)");
    return std::stoull(text.substr(0, digits)) * unit;
}

// Options every store-backed command shares.
struct StoreArgs {
    std::string db;
    std::string budget = "256MiB";
    bool verbose = false;

    void attach(CLI::App* cmd, bool with_budget = true) {
        auto* opt = cmd->add_option("--db,-d", db, "Store directory");
        opt->envname("OCELSTORE_DB");
        opt->required();
        if (with_budget)
            cmd->add_option("--budget,-b", budget,
                            "Memory budget, with optional KiB/MiB/GiB suffix "
                            "(default 256MiB)");
        cmd->add_flag("--verbose,-v", verbose, "Diagnostics on stderr");
    }

    ocel::StoreOptions store_options() const {
        return ocel::StoreOptions{parse_budget(budget)};
    }
};

void report_notes(const std::vector<std::string>& notes) {
    for (const auto& n : notes) std::cerr << "note: " << n << "\n";
}

int run_import(const StoreArgs& sa, const std::string& file,
               const std::string& format_name) {
    auto store = ocel::Store::create(sa.db, sa.store_options());
    auto input = ocel::open_log_stream(file, ocel::format_from_name(format_name));
    const ocel::IngestStats stats = store->ingest(*input);
    std::printf("events=%llu objects=%llu postings=%llu segment_bytes=%llu "
                "index_bytes=%llu seconds=%.3f\n",
                static_cast<unsigned long long>(stats.events),
                static_cast<unsigned long long>(stats.objects),
                static_cast<unsigned long long>(stats.postings),
                static_cast<unsigned long long>(stats.segment_bytes),
                static_cast<unsigned long long>(stats.index_bytes),
                stats.wall_seconds);
    return 0;
}

int run_export(const StoreArgs& sa, const std::string& file,
               const std::string& format_name) {
    auto store = ocel::Store::open_read_only(sa.db, sa.store_options());
    if (sa.verbose) report_notes(store->recovery_notes());
    auto stream = store->export_stream();
    ocel::LogFormat format = ocel::format_from_name(format_name);
    if (format == ocel::LogFormat::Auto) format = ocel::format_from_path(file);
    ocel::write_log(*stream, file, format);
    std::cerr << "wrote " << file << "\n";
    return 0;
}

int run_dfg(const StoreArgs& sa, const std::vector<std::string>& types,
            bool all, const std::string& format, const std::string& spill_dir,
            std::size_t parallel) {
    auto store = ocel::Store::open_read_only(sa.db, sa.store_options());
    const std::size_t budget = parse_budget(sa.budget);
    ocel::Mdfg graph;
    if (all || types.empty()) {
        graph = ocel::mdfg_all(*store, budget, spill_dir, parallel);
    } else {
        graph = ocel::mdfg(*store,
                           std::set<std::string>(types.begin(), types.end()),
                           budget, spill_dir, parallel);
    }
    if (sa.verbose)
        std::cerr << "aggregation high water "
                  << graph.agg_metrics.high_water_bytes << " bytes, spill "
                  << graph.agg_metrics.spill_bytes << " bytes\n";
    if (format == "dot")
        std::cout << ocel::mdfg_to_dot(graph);
    else
        std::cout << ocel::mdfg_to_json(graph);
    return 0;
}

int run_stats(const StoreArgs& sa, const std::string& what,
              const std::string& format, const std::string& spill_dir) {
    auto store = ocel::Store::open_read_only(sa.db, sa.store_options());
    const std::size_t budget = parse_budget(sa.budget);
    if (what == "activities") {
        const auto stats = ocel::activity_stats(*store, spill_dir);
        std::cout << (format == "csv" ? ocel::activity_stats_to_csv(stats)
                                      : ocel::activity_stats_to_json(stats));
    } else if (what == "object-types") {
        const auto stats = ocel::object_type_stats(*store);
        if (format == "csv") {
            std::cout << ocel::object_type_stats_to_csv(stats);
        } else {
            // Flat {type: object_count} map; the full rows live in the CSV.
            nlohmann::ordered_json out = nlohmann::ordered_json::object();
            for (const auto& [type, row] : stats)
                out[type] = row.object_count;
            std::cout << out.dump() << "\n";
        }
    } else {
        const auto times =
            ocel::time_between_activities(*store, budget, spill_dir);
        std::cout << (format == "csv" ? ocel::pair_times_to_csv(times)
                                      : ocel::pair_times_to_json(times));
    }
    return 0;
}

int run_lifecycle(const StoreArgs& sa, const std::string& object_id) {
    auto store = ocel::Store::open_read_only(sa.db, sa.store_options());
    const auto entry = ocel::lifecycle(*store, object_id);
    nlohmann::json activities = nlohmann::json::array();
    if (entry) {
        for (const auto& step : entry->lifecycle)
            activities.push_back(step.activity);
    } else {
        std::cerr << "object '" << object_id
                  << "' is referenced by no event\n";
    }
    std::cout << activities.dump() << "\n";
    return 0;
}

int run_audit(const StoreArgs& sa) {
    // Writable open: a store left dirty by a crash is repaired first and the
    // repair notes become part of the report.
    auto store = ocel::Store::open(sa.db, sa.store_options());
    const ocel::AuditReport report = store->audit();
    nlohmann::json out;
    out["ok"] = report.ok();
    out["violations"] = report.violations;
    out["notes"] = report.notes;
    std::cout << out.dump(2) << "\n";
    return report.ok() ? 0 : 2;
}

struct GenArgs {
    std::uint64_t seed = 1;
    std::uint64_t events = 1000;
    std::uint32_t types = 3;
    std::uint32_t objects_per_type = 100;
    std::string omap = "1:4";
    std::uint32_t activities = 5;
    std::uint32_t vmap = 2;
    double span_days = 30;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Generator seed (default 1)");
        cmd->add_option("--types", types, "Object types (default 3)");
        cmd->add_option("--objects-per-type", objects_per_type,
                        "Objects per type (default 100)");
        cmd->add_option("--omap", omap,
                        "Omap size range MIN:MAX (default 1:4)");
        cmd->add_option("--activities", activities,
                        "Activities per type (default 5)");
        cmd->add_option("--vmap", vmap,
                        "Event attributes (default 2)");
        cmd->add_option("--span-days", span_days,
                        "Timestamp span in days (default 30)");
    }

    ocel::GenSpec spec() const {
        ocel::GenSpec out;
        out.seed = seed;
        out.n_events = events;
        out.n_object_types = types;
        out.objects_per_type = objects_per_type;
        const auto colon = omap.find(':');
        if (colon == std::string::npos)
            throw ocel::ConfigError("--omap expects MIN:MAX");
        try {
            out.omap_min = static_cast<std::uint32_t>(
                std::stoul(omap.substr(0, colon)));
            out.omap_max = static_cast<std::uint32_t>(
                std::stoul(omap.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ocel::ConfigError("--omap expects MIN:MAX");
        }
        out.activities_per_type = activities;
        out.vmap_attributes = vmap;
        out.span_micros =
            static_cast<std::int64_t>(span_days * 24 * 3600 * 1e6);
        return out;
    }
};

int run_generate(const GenArgs& ga, const std::string& file,
                 const std::string& format_name) {
    ocel::LogFormat format = ocel::format_from_name(format_name);
    if (format == ocel::LogFormat::Auto) {
        format = ocel::format_from_path(file);
        if (format == ocel::LogFormat::Auto) format = ocel::LogFormat::Json;
    }
    auto sink = ocel::open_file_sink(file);
    const ocel::GenStats stats = ocel::generate(ga.spec(), *sink, format);
    std::printf("events=%llu objects=%llu postings=%llu bytes=%llu\n",
                static_cast<unsigned long long>(stats.events),
                static_cast<unsigned long long>(stats.objects),
                static_cast<unsigned long long>(stats.postings),
                static_cast<unsigned long long>(stats.bytes));
    return 0;
}

int run_bench_cmd(const GenArgs& ga, const std::vector<std::uint64_t>& sizes,
                  const std::string& budget, const std::string& work_dir,
                  bool keep, std::size_t parallel) {
    ocel::BenchOptions options;
    options.spec = ga.spec();
    options.budget_bytes = parse_budget(budget);
    options.work_dir = work_dir;
    options.keep_artifacts = keep;
    options.workers = parallel;
    bool header = false;
    options.on_row = [&](const ocel::BenchRow& row) {
        const std::string table = ocel::bench_report_table({{row}});
        if (!header) {
            std::cerr << table;
            header = true;
        } else {
            std::cerr << table.substr(table.find('\n') + 1);
        }
    };
    const ocel::BenchReport report = ocel::run_bench(sizes, options);
    std::cout << ocel::bench_report_csv(report);
    for (const auto& row : report.rows)
        if (!row.ok) return 2;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedded object-centric event log store"};
    app.require_subcommand(1);

    std::function<int()> action;

    // import
    auto* import_cmd =
        app.add_subcommand("import", "Load a JSON/XML log into a new store");
    static StoreArgs import_store;
    static std::string import_file, import_format = "auto";
    import_store.attach(import_cmd);
    import_cmd->add_option("file", import_file, "Log file (.json/.xml[.gz])")
        ->required();
    import_cmd->add_option("--format", import_format,
                           "json|xml|auto (default auto: sniff content)");
    import_cmd->callback([&] {
        action = [&] {
            return run_import(import_store, import_file, import_format);
        };
    });

    // export
    auto* export_cmd =
        app.add_subcommand("export", "Serialize a store back to a log file");
    static StoreArgs export_store;
    static std::string export_file, export_format = "auto";
    export_store.attach(export_cmd);
    export_cmd->add_option("file", export_file, "Output path; .gz compresses")
        ->required();
    export_cmd->add_option("--format", export_format,
                           "json|xml|auto (default auto: from extension)");
    export_cmd->callback([&] {
        action = [&] {
            return run_export(export_store, export_file, export_format);
        };
    });

    // dfg
    auto* dfg_cmd = app.add_subcommand(
        "dfg", "Directly-follows graph per object type");
    static StoreArgs dfg_store;
    static std::vector<std::string> dfg_types;
    static bool dfg_all = false;
    static std::string dfg_format = "dot", dfg_spill;
    static std::size_t dfg_parallel = 1;
    dfg_store.attach(dfg_cmd);
    dfg_cmd->add_option("--object-type,-t", dfg_types,
                        "Restrict to these object types");
    dfg_cmd->add_flag("--all", dfg_all, "All object types (the default)");
    dfg_cmd->add_option("--format", dfg_format, "dot|json (default dot)")
        ->check(CLI::IsMember({"dot", "json"}));
    dfg_cmd->add_option("--spill-dir", dfg_spill,
                        "Directory for aggregation spill files");
    dfg_cmd->add_option("--parallel", dfg_parallel,
                        "Threads for spilled partitions (default 1)");
    dfg_cmd->callback([&] {
        action = [&] {
            return run_dfg(dfg_store, dfg_types, dfg_all, dfg_format,
                           dfg_spill, dfg_parallel);
        };
    });

    // stats
    auto* stats_cmd =
        app.add_subcommand("stats", "Activity, object-type or timing tables");
    static StoreArgs stats_store;
    static std::string stats_what, stats_format = "json", stats_spill;
    stats_store.attach(stats_cmd);
    stats_cmd
        ->add_option("what", stats_what,
                     "activities | object-types | times")
        ->required()
        ->check(CLI::IsMember({"activities", "object-types", "times"}));
    stats_cmd->add_option("--format", stats_format, "json|csv (default json)")
        ->check(CLI::IsMember({"json", "csv"}));
    stats_cmd->add_option("--spill-dir", stats_spill,
                          "Directory for spill files");
    stats_cmd->callback([&] {
        action = [&] {
            return run_stats(stats_store, stats_what, stats_format,
                             stats_spill);
        };
    });

    // lifecycle
    auto* lc_cmd = app.add_subcommand(
        "lifecycle", "Ordered activities of one object, as a JSON array");
    static StoreArgs lc_store;
    static std::string lc_object;
    lc_store.attach(lc_cmd, /*with_budget=*/false);
    lc_cmd->add_option("object_id", lc_object, "Object id")->required();
    lc_cmd->callback([&] {
        action = [&] { return run_lifecycle(lc_store, lc_object); };
    });

    // audit
    auto* audit_cmd =
        app.add_subcommand("audit", "Verify checksums, order and indexes");
    static StoreArgs audit_store;
    audit_store.attach(audit_cmd);
    audit_cmd->callback([&] { action = [&] { return run_audit(audit_store); }; });

    // generate
    auto* gen_cmd =
        app.add_subcommand("generate", "Write a synthetic log file");
    static GenArgs gen_args;
    static std::string gen_file, gen_format = "auto";
    gen_cmd->add_option("file", gen_file, "Output path")->required();
    gen_cmd->add_option("--events", gen_args.events, "Event count")
        ->required();
    gen_args.attach(gen_cmd);
    gen_cmd->add_option("--format", gen_format,
                        "json|xml|auto (default auto: from extension)");
    gen_cmd->callback([&] {
        action = [&] { return run_generate(gen_args, gen_file, gen_format); };
    });

    // bench
    auto* bench_cmd = app.add_subcommand(
        "bench", "Generate, ingest and mine at several sizes; CSV to stdout");
    static GenArgs bench_args;
    static std::vector<std::uint64_t> bench_sizes;
    static std::string bench_budget = "256MiB", bench_work;
    static bool bench_keep = false;
    static std::size_t bench_parallel = 1;
    bench_cmd
        ->add_option("--sizes", bench_sizes,
                     "Event counts, ascending (e.g. --sizes 10000,100000)")
        ->required()
        ->delimiter(',');
    bench_args.attach(bench_cmd);
    bench_cmd->add_option("--budget,-b", bench_budget,
                          "Memory budget (default 256MiB)");
    bench_cmd->add_option("--work-dir", bench_work,
                          "Working directory (default: temp, removed)");
    bench_cmd->add_flag("--keep", bench_keep, "Keep generated artifacts");
    bench_cmd->add_option("--parallel", bench_parallel,
                          "Threads for spilled partitions (default 1)");
    bench_cmd->callback([&] {
        action = [&] {
            return run_bench_cmd(bench_args, bench_sizes, bench_budget,
                                 bench_work, bench_keep, bench_parallel);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (!action) {
        std::cerr << app.help();
        return 1;
    }

    try {
        return action();
    } catch (const ocel::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ocel::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ocel::Error& e) {
        // Parse, schema, corruption and data errors: the input is bad.
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
