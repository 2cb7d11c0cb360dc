#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "ocel/errors.hpp"
#include "ocel/external_sort.hpp"
#include "ocel/sstable.hpp"

#include "support.hpp"

using namespace ocel;
using testsupport::TempDir;

namespace {

std::vector<std::pair<std::string, std::string>> drain(SortedRunIterator& it) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string k, v;
    while (it.next(k, v)) out.emplace_back(k, v);
    return out;
}

} // namespace

TEST_SUITE_BEGIN("sort+sstable");

TEST_CASE("sortable int64 encoding preserves order bytewise") {
    const std::int64_t values[] = {
        std::numeric_limits<std::int64_t>::min(), -1000000, -1, 0, 1,
        42,  1000000,  std::numeric_limits<std::int64_t>::max()};
    std::string prev;
    for (std::int64_t v : values) {
        std::string enc;
        append_sortable_int64(enc, v);
        REQUIRE(enc.size() == 8);
        CHECK(read_sortable_int64(enc) == v);
        if (!prev.empty()) CHECK(prev < enc);
        prev = enc;
    }

    std::mt19937_64 rng(21);
    for (int i = 0; i < 5000; ++i) {
        const auto a = static_cast<std::int64_t>(rng());
        const auto b = static_cast<std::int64_t>(rng());
        std::string ea, eb;
        append_sortable_int64(ea, a);
        append_sortable_int64(eb, b);
        CHECK((a < b) == (ea < eb));
        CHECK(read_sortable_int64(ea) == a);
    }
}

TEST_CASE("external sorter matches std::sort, in memory and spilled") {
    std::mt19937_64 rng(22);
    std::vector<std::pair<std::string, std::string>> want;
    for (int i = 0; i < 20000; ++i) {
        std::string key = "k" + std::to_string(rng() % 4096);
        std::string value = "v" + std::to_string(rng() % 97);
        want.emplace_back(std::move(key), std::move(value));
    }
    std::shuffle(want.begin(), want.end(), rng);

    auto run = [&](std::size_t budget, bool expect_spill) {
        TempDir dir("extsort");
        ExternalSorter sorter(dir.path(), "t", budget);
        for (const auto& [k, v] : want) sorter.add(k, v);
        auto it = sorter.finish();
        const auto got = drain(*it);
        if (expect_spill) {
            CHECK(sorter.spill_bytes() > 0);
            CHECK(sorter.runs_written() > 1);
        } else {
            CHECK(sorter.spill_bytes() == 0);
        }
        return got;
    };

    std::vector<std::pair<std::string, std::string>> sorted = want;
    std::sort(sorted.begin(), sorted.end());

    const auto in_memory = run(1 << 30, false);
    CHECK(in_memory == sorted);

    // A tiny budget forces many runs; the merge must agree exactly.
    const auto spilled = run(4096, true);
    CHECK(spilled == sorted);

    // Run files are cleaned up by the destructor (TempDir would also catch
    // leftovers, but check explicitly that the merge owned its files).
    TempDir dir("extsort_cleanup");
    {
        ExternalSorter sorter(dir.path(), "t", 1024);
        for (const auto& [k, v] : want) sorter.add(k, v);
        auto it = sorter.finish();
        std::string k, v;
        while (it->next(k, v)) {
        }
    }
    std::size_t leftovers = 0;
    if (std::filesystem::exists(dir.path()))
        for ([[maybe_unused]] const auto& e :
             std::filesystem::directory_iterator(dir.path()))
            ++leftovers;
    CHECK(leftovers == 0);
}

TEST_CASE("external sorter handles empty input and duplicate records") {
    TempDir dir("extsort_edge");
    ExternalSorter empty(dir.path(), "e", 1024);
    auto it = empty.finish();
    CHECK(drain(*it).empty());

    ExternalSorter dups(dir.path(), "d", 64); // every add spills
    for (int i = 0; i < 100; ++i) dups.add("same", "pay");
    auto dit = dups.finish();
    const auto got = drain(*dit);
    CHECK(got.size() == 100);
    for (const auto& [k, v] : got) {
        CHECK(k == "same");
        CHECK(v == "pay");
    }
}

TEST_CASE("sstable round-trips keys and postings") {
    TempDir dir("sst");
    std::filesystem::create_directories(dir.path());
    const std::string path = dir.sub("t.idx").string();

    // 200 keys crosses the 64-entry directory stride three times.
    std::vector<std::pair<std::string, std::vector<std::uint64_t>>> entries;
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
        std::string key = "key" + std::to_string(1000 + i);
        std::vector<std::uint64_t> postings;
        std::uint64_t loc = 0;
        const int n = 1 + static_cast<int>(rng() % 20);
        for (int j = 0; j < n; ++j) {
            loc += 1 + rng() % 1000;
            postings.push_back(loc);
        }
        entries.emplace_back(std::move(key), std::move(postings));
    }

    SstWriter::Totals totals;
    {
        SstWriter writer(path, IndexKind::Activity);
        for (const auto& [k, p] : entries) writer.add(k, p);
        totals = writer.finish();
    }
    CHECK(totals.entry_count == entries.size());
    CHECK(totals.file_bytes == std::filesystem::file_size(path));

    SstReader reader(path, IndexKind::Activity);
    CHECK(reader.entry_count() == entries.size());
    CHECK(reader.verify_checksum());

    // Every key, including the stride boundaries, looks up exactly.
    for (const auto& [k, p] : entries) CHECK(reader.lookup(k) == p);
    CHECK(reader.lookup("absent").empty());
    CHECK(reader.lookup("key0999").empty());
    CHECK(reader.lookup("key1200").empty());
    CHECK(reader.lookup("").empty());

    // scan yields everything in order.
    std::vector<std::pair<std::string, std::vector<std::uint64_t>>> scanned;
    reader.scan([&](std::string_view k, const std::vector<std::uint64_t>& p) {
        scanned.emplace_back(std::string(k), p);
    });
    CHECK(scanned == entries);
}

TEST_CASE("sstable rejects wrong kind, corruption, and bad writers") {
    TempDir dir("sst_bad");
    std::filesystem::create_directories(dir.path());
    const std::string path = dir.sub("t.idx").string();
    {
        SstWriter writer(path, IndexKind::Omap);
        writer.add("a", {1, 5, 9});
        writer.add("b", {2});
        writer.finish();
    }

    // Wrong kind is refused at open.
    CHECK_THROWS_AS(SstReader(path, IndexKind::Activity), CorruptionError);

    // A flipped body byte fails the checksum but not necessarily open.
    const std::string flipped = dir.sub("flipped.idx").string();
    std::filesystem::copy_file(path, flipped);
    {
        std::fstream f(flipped, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(7);
        char c;
        f.seekg(7);
        f.get(c);
        f.seekp(7);
        f.put(static_cast<char>(c ^ 0x01));
    }
    bool checksum_ok = true;
    try {
        SstReader reader(flipped, IndexKind::Omap);
        checksum_ok = reader.verify_checksum();
    } catch (const CorruptionError&) {
        checksum_ok = false;
    }
    CHECK(!checksum_ok);

    // Truncation is refused at open.
    const std::string trunc = dir.sub("trunc.idx").string();
    std::filesystem::copy_file(path, trunc);
    std::filesystem::resize_file(trunc, std::filesystem::file_size(trunc) - 5);
    CHECK_THROWS_AS(SstReader(trunc, IndexKind::Omap), CorruptionError);

    // Writers insist on strictly ascending keys and postings.
    const std::string strict = dir.sub("strict.idx").string();
    SstWriter writer(strict, IndexKind::Omap);
    writer.add("m", {3});
    CHECK_THROWS(writer.add("m", {4}));
    CHECK_THROWS(writer.add("a", {1}));
    CHECK_THROWS(writer.add("z", {5, 5}));
}

TEST_CASE("empty sstable opens and misses cleanly") {
    TempDir dir("sst_empty");
    std::filesystem::create_directories(dir.path());
    const std::string path = dir.sub("t.idx").string();
    {
        SstWriter writer(path, IndexKind::EventId);
        writer.finish();
    }
    SstReader reader(path, IndexKind::EventId);
    CHECK(reader.entry_count() == 0);
    CHECK(reader.lookup("anything").empty());
    CHECK(reader.verify_checksum());
    std::size_t seen = 0;
    reader.scan([&](std::string_view, const std::vector<std::uint64_t>&) { ++seen; });
    CHECK(seen == 0);
}

TEST_SUITE_END();
