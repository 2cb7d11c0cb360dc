#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ocel/format.hpp"
#include "ocel/model.hpp"
#include "ocel/stream.hpp"

#include "support.hpp"

#ifndef OCELSTORE_BIN
#error "OCELSTORE_BIN must point at the CLI binary"
#endif

using testsupport::sample_log;
using testsupport::TempDir;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with `args` (already shell-quoted by the caller where
// needed); optional extra environment assignments prefix the command.
RunResult run_cli(const std::string& args, const std::string& env = {}) {
    static int counter = 0;
    const std::string tag = std::to_string(++counter);
    const std::filesystem::path out =
        std::filesystem::temp_directory_path() / ("cli_out_" + tag);
    const std::filesystem::path err =
        std::filesystem::temp_directory_path() / ("cli_err_" + tag);
    std::string cmd = env;
    if (!env.empty()) cmd += " ";
    cmd += std::string(OCELSTORE_BIN) + " " + args + " > " + out.string() +
           " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    std::filesystem::remove(out);
    std::filesystem::remove(err);
    return result;
}

// Writes the sample log to dir/sample.jsonocel and returns the path.
std::string sample_file(const TempDir& dir) {
    std::filesystem::create_directories(dir.path());
    const std::string path = (dir.path() / "sample.jsonocel").string();
    ocel::MemoryRecordStream stream(sample_log());
    ocel::write_log(stream, path, ocel::LogFormat::Json);
    return path;
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("import reports the ingest stats line") {
    TempDir dir("cli_import");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();

    const RunResult r = run_cli("import --db " + db + " " + file);
    CAPTURE(r.err);
    CHECK(r.exit_code == 0);
    CHECK(r.out.rfind("events=7 objects=3 postings=7 segment_bytes=", 0) == 0);
    CHECK(r.out.find(" index_bytes=") != std::string::npos);
    CHECK(r.out.find(" seconds=") != std::string::npos);

    // Second import into the same store is a data/config failure, rc 1.
    const RunResult again = run_cli("import --db " + db + " " + file);
    CHECK(again.exit_code == 1);
    CHECK(!again.err.empty());
}

TEST_CASE("importing an empty log reports zero counts") {
    TempDir dir("cli_import_empty");
    std::filesystem::create_directories(dir.path());
    const std::string file = (dir.path() / "empty.jsonocel").string();
    {
        ocel::OcelLog empty;
        ocel::MemoryRecordStream stream(empty);
        ocel::write_log(stream, file, ocel::LogFormat::Json);
    }
    const std::string db = (dir.path() / "db").string();
    const RunResult r = run_cli("import --db " + db + " " + file);
    CHECK(r.exit_code == 0);
    CHECK(r.out.rfind("events=0 objects=0 postings=0 ", 0) == 0);
}

TEST_CASE("export reproduces the imported document") {
    TempDir dir("cli_export");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    REQUIRE(run_cli("import --db " + db + " " + file).exit_code == 0);

    const std::string exported = (dir.path() / "out.jsonocel").string();
    const RunResult r = run_cli("export --db " + db + " " + exported);
    CHECK(r.exit_code == 0);

    auto original = ocel::open_log_stream(file);
    auto round = ocel::open_log_stream(exported);
    CHECK(testsupport::semantic_equal(ocel::collect(*round),
                                      ocel::collect(*original)));

    // XML flavor as well, picked from the extension.
    const std::string xml_out = (dir.path() / "out.xmlocel").string();
    CHECK(run_cli("export --db " + db + " " + xml_out).exit_code == 0);
    auto xml_stream = ocel::open_log_stream(xml_out);
    CHECK(testsupport::semantic_equal(ocel::collect(*xml_stream),
                                      sample_log()));
}

TEST_CASE("dfg emits DOT with the three order arcs") {
    TempDir dir("cli_dfg");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    REQUIRE(run_cli("import --db " + db + " " + file).exit_code == 0);

    const RunResult dot =
        run_cli("dfg --db " + db + " --object-type order --format dot");
    CHECK(dot.exit_code == 0);
    CHECK(dot.out.find("digraph") != std::string::npos);
    const std::vector<std::pair<std::string, std::string>> arcs = {
        {"Create Order", "Payment"},
        {"Create Order", "Change Order"},
        {"Change Order", "Cancel Order"}};
    for (const auto& [a, b] : arcs) {
        CAPTURE(a);
        CAPTURE(b);
        const auto pos_a = dot.out.find("\"" + a + "\" -> \"" + b + "\"");
        CHECK(pos_a != std::string::npos);
    }
    CHECK(std::count(dot.out.begin(), dot.out.end(), '>') >= 3);

    const RunResult json = run_cli("dfg --db " + db + " --format json");
    CHECK(json.exit_code == 0);
    const auto doc = nlohmann::json::parse(json.out);
    CHECK(doc.contains("types"));
    CHECK(doc["types"].contains("order"));
    CHECK(doc["types"].contains("invoice"));
}

TEST_CASE("stats subcommand prints the three tables") {
    TempDir dir("cli_stats");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    REQUIRE(run_cli("import --db " + db + " " + file).exit_code == 0);

    const RunResult ot = run_cli("stats object-types --db " + db);
    CHECK(ot.exit_code == 0);
    CHECK(nlohmann::json::parse(ot.out) ==
          nlohmann::json({{"invoice", 1}, {"order", 2}}));

    const RunResult acts = run_cli("stats activities --db " + db);
    CHECK(acts.exit_code == 0);
    const auto adoc = nlohmann::json::parse(acts.out);
    CHECK(adoc["Create Order"]["event_count"] == 2);

    const RunResult csv =
        run_cli("stats activities --db " + db + " --format csv");
    CHECK(csv.exit_code == 0);
    CHECK(csv.out.rfind("activity,event_count,total_objects,unique_objects\n",
                        0) == 0);

    const RunResult times = run_cli("stats times --db " + db);
    CHECK(times.exit_code == 0);
    const auto tdoc = nlohmann::json::parse(times.out);
    CHECK(!tdoc.empty());
}

TEST_CASE("lifecycle prints the activity list; unknown ids print []") {
    TempDir dir("cli_lifecycle");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    REQUIRE(run_cli("import --db " + db + " " + file).exit_code == 0);

    const RunResult o1 = run_cli("lifecycle o1 --db " + db);
    CHECK(o1.exit_code == 0);
    CHECK(nlohmann::json::parse(o1.out) ==
          nlohmann::json::array({"Create Order", "Payment"}));

    const RunResult o2 = run_cli("lifecycle o2 --db " + db);
    CHECK(nlohmann::json::parse(o2.out) ==
          nlohmann::json::array(
              {"Create Order", "Change Order", "Cancel Order"}));

    const RunResult ghost = run_cli("lifecycle ghost --db " + db);
    CHECK(ghost.exit_code == 0);
    CHECK(nlohmann::json::parse(ghost.out) == nlohmann::json::array());
    CHECK(!ghost.err.empty()); // a note, not an error
}

TEST_CASE("audit reports ok on a healthy store") {
    TempDir dir("cli_audit");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    REQUIRE(run_cli("import --db " + db + " " + file).exit_code == 0);

    const RunResult r = run_cli("audit --db " + db);
    CHECK(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["ok"] == true);
    CHECK(doc["violations"].empty());
}

TEST_CASE("generate writes an importable log") {
    TempDir dir("cli_generate");
    std::filesystem::create_directories(dir.path());
    const std::string file = (dir.path() / "gen.jsonocel").string();
    const RunResult gen =
        run_cli("generate " + file + " --events 500 --seed 9 --omap 2:4");
    CAPTURE(gen.err);
    CHECK(gen.exit_code == 0);

    const std::string db = (dir.path() / "db").string();
    const RunResult imp = run_cli("import --db " + db + " " + file);
    CHECK(imp.exit_code == 0);
    CHECK(imp.out.rfind("events=500 ", 0) == 0);
}

TEST_CASE("bench prints the CSV on stdout and the table on stderr") {
    TempDir dir("cli_bench");
    std::filesystem::create_directories(dir.path());
    const RunResult r = run_cli("bench --sizes 100,200 --work-dir " +
                                (dir.path() / "work").string());
    CAPTURE(r.err);
    CHECK(r.exit_code == 0);
    CHECK(r.out.rfind("size,ingest_s,json_bytes,segment_bytes,index_bytes,"
                      "mdfg_s,agg_highwater_bytes,spill_bytes\n",
                      0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
    CHECK(r.err.find("100") != std::string::npos);
}

TEST_CASE("the store directory can come from the environment") {
    TempDir dir("cli_env");
    const std::string file = sample_file(dir);
    const std::string db = (dir.path() / "db").string();
    const RunResult r =
        run_cli("import " + file, "OCELSTORE_DB=" + db);
    CAPTURE(r.err);
    CHECK(r.exit_code == 0);
    CHECK(run_cli("stats object-types", "OCELSTORE_DB=" + db).exit_code == 0);
}

TEST_CASE("exit codes separate usage, data, and io failures") {
    TempDir dir("cli_rc");
    std::filesystem::create_directories(dir.path());
    const std::string db = (dir.path() / "db").string();

    // No subcommand and unknown flags are usage errors.
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("import --db " + db + " --frobnicate x").exit_code == 1);
    // Bad budget suffix is configuration, rc 1.
    const std::string file = sample_file(dir);
    CHECK(run_cli("import --db " + db + " --budget 64Q " + file).exit_code ==
          1);

    // Malformed input data is rc 2.
    const std::string broken = (dir.path() / "broken.jsonocel").string();
    {
        std::ofstream out(broken);
        out << "{\"ocel:global-log\": oops";
    }
    const RunResult parse = run_cli("import --db " + db + "2 " + broken);
    CHECK(parse.exit_code == 2);
    CHECK(!parse.err.empty());

    // A missing input file is an io failure, rc 3.
    CHECK(run_cli("import --db " + db + "3 /nonexistent/log.jsonocel")
              .exit_code == 3);

    // Opening a store that does not exist is also io, rc 3.
    CHECK(run_cli("stats activities --db /nonexistent/db").exit_code == 3);
}

TEST_CASE("budget suffixes are accepted") {
    TempDir dir("cli_budget");
    const std::string file = sample_file(dir);
    for (const char* budget : {"1048576", "1024KiB", "64MiB", "1GiB"}) {
        CAPTURE(budget);
        const std::string db =
            (dir.path() / ("db_" + std::string(budget))).string();
        CHECK(run_cli("import --db " + db + " --budget " + budget + " " +
                      file)
                  .exit_code == 0);
    }
}

TEST_SUITE_END();
