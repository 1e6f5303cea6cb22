#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace orchestron {

enum class TraceEventType {
    graph_built,
    node_ready,
    node_started,
    node_completed,
    node_failed,
    node_skipped,
    fallback_activated,
    operation_completed,
    operation_failed,
};

const char* to_string(TraceEventType type);

struct TraceEvent {
    int64_t ts_ms = 0;          // wall clock, ms since epoch
    std::string step;           // empty for operation-level events
    TraceEventType event = TraceEventType::graph_built;
    std::string detail;
};

// Ordered record of node lifecycle events for one execution. Events are
// appended by the scheduling thread only, so list order is causal order.
struct ExecutionTrace {
    std::string request_id;
    std::vector<TraceEvent> events;

    void add(TraceEventType event, const std::string& step = "", const std::string& detail = "");

    // One JSON object per line: ts, request_id, step, event, detail.
    std::string to_jsonl() const;
};

}  // namespace orchestron
