#pragma once

#include <map>
#include <string>
#include <vector>

#include "orchestron/outcome.hpp"
#include "orchestron/spec_model.hpp"

namespace orchestron {

enum class ResponseStatus { complete, partial, failed };

const char* to_string(ResponseStatus status);

struct CompletenessReport {
    std::vector<std::string> required_present;
    std::vector<std::string> required_missing;
    std::vector<std::string> optional_missing;
    std::vector<std::string> fallbacks_used;    // primary step names served by fallback
    Json to_json() const;
};

struct CompositeResponse {
    std::string operation_name;
    std::string request_id;
    ResponseStatus status = ResponseStatus::failed;
    Json payload = Json::object();              // step name -> step payload
    std::map<std::string, StepOutcome> outcomes;
    CompletenessReport completeness;
    int64_t total_duration_ms = 0;

    Json to_json() const;
};

// Namespaced merge: one key per successful step, value unchanged. Failed and
// skipped steps are absent from the payload; they live in outcomes and the
// completeness report instead.
Json aggregate_results(const AggregationSpec& agg, const std::map<std::string, Json>& results,
                       const std::map<std::string, StepError>& failures);

// Classifies the aggregate. The required set is the union of role-required
// steps and aggregation.required_steps; fallback_used counts as present.
std::pair<ResponseStatus, CompletenessReport> validate_response(
    const Json& payload, const std::map<std::string, StepOutcome>& outcomes,
    const OperationSpec& spec);

}  // namespace orchestron
