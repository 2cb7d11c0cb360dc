// Shared fixtures and brute-force oracles for the test suite.
//
// The oracles recompute every statistic directly from an in-memory OcelLog
// with the simplest possible code, so library results can be checked against
// an independent implementation.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ocel/agg.hpp"
#include "ocel/mining.hpp"
#include "ocel/model.hpp"
#include "ocel/store.hpp"

namespace testsupport {

// Self-deleting temporary directory; the path does not exist yet when the
// constructor returns (stores want to create it themselves).
class TempDir {
public:
    explicit TempDir(const std::string& label);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return dir_; }
    std::filesystem::path sub(const std::string& name) const {
        return dir_ / name;
    }

private:
    std::filesystem::path dir_;
};

// The worked example: two orders and one invoice over seven events.
//   o1: Create Order, Payment
//   o2: Create Order, Change Order, Cancel Order
//   i1: Emit Invoice, Record Payment
ocel::OcelLog sample_log();

// Hand-written JSON-OCEL serialization of sample_log(), for parser tests
// that must not depend on the serializer.
std::string sample_log_json();

// Creates a store under dir and ingests the log.
std::unique_ptr<ocel::Store> store_with(const std::filesystem::path& dir,
                                        const ocel::OcelLog& log,
                                        std::size_t budget = 256ull << 20);

// Deterministic synthetic log (wraps the generator).
ocel::OcelLog generated_log(std::uint64_t seed, std::uint64_t n_events,
                            std::uint32_t types = 3,
                            std::uint32_t objects_per_type = 50,
                            std::uint32_t omap_max = 4);

// Equal metadata, equal event sets, equal object sets; order-insensitive.
bool semantic_equal(const ocel::OcelLog& a, const ocel::OcelLog& b);

// --- brute-force oracles ----------------------------------------------------

// object id -> ordered lifecycle, built by a direct nested loop.
std::map<std::string, std::vector<ocel::LifecycleStep>> oracle_lifecycles(
    const ocel::OcelLog& log);

// Multi-DFG, all types when `types` is null. Matches the library's
// conventions: dangling ids fall into ocel::kUnknownType, requested types
// appear even when empty.
ocel::Mdfg oracle_mdfg(const ocel::OcelLog& log,
                       const std::set<std::string>* types);

ocel::ActivityStats oracle_activity_stats(const ocel::OcelLog& log);
ocel::ObjectTypeStats oracle_object_type_stats(const ocel::OcelLog& log);
ocel::ActivityPairTimes oracle_pair_times(const ocel::OcelLog& log);

// |a - b| <= tol * max(|a|, |b|, 1)
bool close_rel(double a, double b, double tol = 1e-9);

// Compares library output against the oracle with close_rel on the floating
// fields; returns a description of the first mismatch, empty when equal.
std::string diff_pair_times(const ocel::ActivityPairTimes& got,
                            const ocel::ActivityPairTimes& want);

} // namespace testsupport
