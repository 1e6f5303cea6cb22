#include "orchestron/aggregation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace orchestron {

const char* to_string(ResponseStatus status) {
    switch (status) {
        case ResponseStatus::complete: return "complete";
        case ResponseStatus::partial: return "partial";
        case ResponseStatus::failed: return "failed";
    }
    return "failed";
}

const char* to_string(StepStatus status) {
    switch (status) {
        case StepStatus::success: return "success";
        case StepStatus::failed: return "failed";
        case StepStatus::skipped: return "skipped";
        case StepStatus::fallback_used: return "fallback_used";
    }
    return "failed";
}

const char* to_string(StepError::Kind kind) {
    switch (kind) {
        case StepError::Kind::timeout: return "timeout";
        case StepError::Kind::transport: return "transport";
        case StepError::Kind::upstream_status: return "upstream_status";
        case StepError::Kind::bind: return "bind";
        case StepError::Kind::transform: return "transform";
    }
    return "transport";
}

Json StepOutcome::to_json() const {
    Json out{{"status", to_string(status)}};
    if (status == StepStatus::success || status == StepStatus::fallback_used)
        out["payload_present"] = true;
    if (attempts > 0) {
        out["attempts"] = attempts;
        out["duration_ms"] = duration_ms;
        out["started_ms"] = started_ms;
        out["finished_ms"] = finished_ms;
    }
    if (error) {
        Json err{{"kind", to_string(error->kind)}, {"detail", error->detail}};
        if (error->upstream_status_code) err["upstream_status_code"] = *error->upstream_status_code;
        out["error"] = err;
    }
    return out;
}

Json aggregate_results(const AggregationSpec& agg, const std::map<std::string, Json>& results,
                       const std::map<std::string, StepError>& failures) {
    if (agg.strategy != "merge")
        throw std::invalid_argument("unknown aggregation strategy: " + agg.strategy);
    (void)failures;  // failed steps are represented in outcomes, not the payload
    Json out = Json::object();
    for (const auto& [step, payload] : results) out[step] = payload;
    return out;
}

std::pair<ResponseStatus, CompletenessReport> validate_response(
    const Json& payload, const std::map<std::string, StepOutcome>& outcomes,
    const OperationSpec& spec) {
    (void)payload;
    std::set<std::string> required;
    for (const auto& step : spec.steps)
        if (step.role == StepRole::required) required.insert(step.name);
    for (const auto& name : spec.aggregation.required_steps)
        if (spec.find_step(name)) required.insert(name);

    auto present = [&](const std::string& name) {
        auto it = outcomes.find(name);
        if (it == outcomes.end()) return false;
        return it->second.status == StepStatus::success ||
               it->second.status == StepStatus::fallback_used;
    };

    CompletenessReport report;
    bool any_optional_missing = false;
    for (const auto& step : spec.steps) {
        if (step.role == StepRole::fallback) {
            continue;  // alternates are accounted for under their primary
        }
        bool has = present(step.name);
        if (required.count(step.name)) {
            (has ? report.required_present : report.required_missing).push_back(step.name);
        } else if (!has) {
            report.optional_missing.push_back(step.name);
            any_optional_missing = true;
        }
        auto it = outcomes.find(step.name);
        if (it != outcomes.end() && it->second.status == StepStatus::fallback_used)
            report.fallbacks_used.push_back(step.name);
    }

    ResponseStatus status = ResponseStatus::complete;
    if (!report.required_missing.empty())
        status = ResponseStatus::failed;
    else if (any_optional_missing)
        status = ResponseStatus::partial;
    return {status, report};
}

Json CompletenessReport::to_json() const {
    return Json{{"required_present", required_present},
                {"required_missing", required_missing},
                {"optional_missing", optional_missing},
                {"fallbacks_used", fallbacks_used}};
}

Json CompositeResponse::to_json() const {
    Json outcome_map = Json::object();
    for (const auto& [name, outcome] : outcomes) outcome_map[name] = outcome.to_json();
    return Json{{"operation", operation_name},
                {"request_id", request_id},
                {"status", to_string(status)},
                {"payload", payload},
                {"outcomes", outcome_map},
                {"completeness", completeness.to_json()},
                {"total_duration_ms", total_duration_ms}};
}

}  // namespace orchestron
