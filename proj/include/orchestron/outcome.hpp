#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "orchestron/invoker.hpp"

namespace orchestron {

enum class StepStatus { success, failed, skipped, fallback_used };

const char* to_string(StepStatus status);

// Terminal result of one node execution, with timing from a monotonic clock
// (offsets relative to operation start).
struct StepOutcome {
    std::string step_name;
    StepStatus status = StepStatus::failed;
    Json payload;                       // present iff success or fallback_used
    std::optional<StepError> error;     // present iff failed
    int attempts = 0;                   // 0 for steps that never ran
    int64_t started_ms = 0;
    int64_t finished_ms = 0;
    int64_t duration_ms = 0;

    Json to_json() const;
};

}  // namespace orchestron
