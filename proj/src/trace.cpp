#include "orchestron/trace.hpp"

#include <chrono>
#include <sstream>

namespace orchestron {

const char* to_string(TraceEventType type) {
    switch (type) {
        case TraceEventType::graph_built: return "graph_built";
        case TraceEventType::node_ready: return "node_ready";
        case TraceEventType::node_started: return "node_started";
        case TraceEventType::node_completed: return "node_completed";
        case TraceEventType::node_failed: return "node_failed";
        case TraceEventType::node_skipped: return "node_skipped";
        case TraceEventType::fallback_activated: return "fallback_activated";
        case TraceEventType::operation_completed: return "operation_completed";
        case TraceEventType::operation_failed: return "operation_failed";
    }
    return "graph_built";
}

void ExecutionTrace::add(TraceEventType event, const std::string& step,
                         const std::string& detail) {
    auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    events.push_back({now, step, event, detail});
}

std::string ExecutionTrace::to_jsonl() const {
    std::ostringstream out;
    for (const auto& e : events) {
        nlohmann::json line{{"ts", e.ts_ms},
                            {"request_id", request_id},
                            {"event", to_string(e.event)}};
        if (!e.step.empty()) line["step"] = e.step;
        if (!e.detail.empty()) line["detail"] = e.detail;
        out << line.dump() << "\n";
    }
    return out.str();
}

}  // namespace orchestron
