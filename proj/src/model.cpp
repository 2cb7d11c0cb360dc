#include "ocel/model.hpp"

#include <algorithm>
#include <unordered_set>

namespace ocel {

void dedup_omap(EventRecord& event) {
    if (event.omap.size() < 2) return;
    // The set must own its keys: the kept strings move (and reallocate)
    // while the scan is still probing.
    std::unordered_set<std::string> seen;
    std::vector<std::string> kept;
    kept.reserve(event.omap.size());
    for (auto& oid : event.omap) {
        if (seen.insert(oid).second) kept.push_back(std::move(oid));
    }
    event.omap = std::move(kept);
}

ValidationReport validate(const OcelLog& log, bool strict) {
    ValidationReport report;
    auto violation = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

    std::unordered_set<std::string_view> event_ids;
    event_ids.reserve(log.events.size());
    std::unordered_set<std::string_view> object_ids;
    object_ids.reserve(log.objects.size());

    for (const auto& obj : log.objects) {
        if (obj.id.empty()) violation("object with empty id");
        if (obj.otype.empty()) violation("object " + obj.id + " has empty type");
        if (!object_ids.insert(obj.id).second)
            violation("duplicate object id " + obj.id);
        for (const auto& [key, value] : obj.ovmap) {
            (void)value;
            if (key.empty()) violation("empty ovmap key in object " + obj.id);
        }
        if (strict && !obj.otype.empty() && !log.metadata.object_types.contains(obj.otype))
            violation("object type " + obj.otype + " of object " + obj.id +
                      " not declared in ocel:object-types");
    }

    const bool check_order = log.metadata.ordering == "timestamp";
    const EventRecord* prev = nullptr;
    for (const auto& event : log.events) {
        if (event.id.empty()) violation("event with empty id");
        if (!event_ids.insert(event.id).second)
            violation("duplicate event id " + event.id);
        if (check_order && prev && !event_order_less(*prev, event) && prev->id != event.id)
            violation("events out of (timestamp, id) order at event " + event.id);
        prev = &event;

        std::unordered_set<std::string_view> seen_oids;
        for (const auto& oid : event.omap) {
            if (!seen_oids.insert(oid).second)
                violation("duplicate object reference " + oid + " in event " + event.id);
            if (!object_ids.contains(oid))
                violation("dangling object reference " + oid + " in event " + event.id);
        }
        if (event.omap.empty())
            report.warnings.push_back("event " + event.id + " has empty omap");

        for (const auto& [key, value] : event.vmap) {
            (void)value;
            if (key.empty()) violation("empty vmap key in event " + event.id);
            else if (strict && !log.metadata.attribute_names.contains(key))
                violation("attribute " + key + " of event " + event.id +
                          " not declared in ocel:attribute-names");
        }
    }

    if (strict) {
        for (const auto& obj : log.objects) {
            for (const auto& [key, value] : obj.ovmap) {
                (void)value;
                if (!key.empty() && !log.metadata.attribute_names.contains(key))
                    violation("attribute " + key + " of object " + obj.id +
                              " not declared in ocel:attribute-names");
            }
        }
    }
    return report;
}

OcelLog sort_events(OcelLog log) {
    std::stable_sort(log.events.begin(), log.events.end(), event_order_less);
    return log;
}

} // namespace ocel
