#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orchestron/aggregation.hpp"
#include "orchestron/invoker.hpp"
#include "orchestron/outcome.hpp"
#include "orchestron/planner.hpp"
#include "orchestron/registry.hpp"
#include "orchestron/trace.hpp"

namespace orchestron {

// batch_wave runs the whole ready set as one synchronous wave and only then
// recomputes readiness; completion_driven dispatches each node the moment it
// becomes ready and a slot frees. Identical outcome sets for failure-free
// runs; completion_driven never has a larger makespan.
enum class SchedulingMode { batch_wave, completion_driven };

const char* to_string(SchedulingMode mode);
std::optional<SchedulingMode> scheduling_mode_from_string(const std::string& s);

struct EngineConfig {
    int max_concurrency = 8;
    int operation_deadline_ms = 5000;   // whole-operation budget
    SchedulingMode scheduling_mode = SchedulingMode::completion_driven;
};

struct OperationError {
    enum class Kind { not_found, bind_failed, required_step_failed, deadline_exceeded };
    Kind kind = Kind::not_found;
    std::string step;
    std::string message;
};

const char* to_string(OperationError::Kind kind);

struct ExecutionResult {
    CompositeResponse response;
    std::optional<OperationError> error;
    ExecutionTrace trace;

    bool ok() const { return !error.has_value(); }
};

// How one node body runs: per-attempt timeout, fixed-backoff retries up to
// max_attempts, retry only on the configured error classes. 5xx retries when
// configured, 4xx never. Returns a failed outcome rather than throwing.
struct StepRunPlan {
    std::string name;
    int timeout_ms = 1000;
    RetryPolicy retry;
};

StepOutcome run_step(const StepRunPlan& plan, const StepCall& call, Invoker& invoker,
                     const CancellationToken& cancel,
                     std::chrono::steady_clock::time_point epoch);

struct PolicyDecision {
    enum class Action { abort_operation, skip_dependents, activate_fallback };
    Action action = Action::skip_dependents;
    std::vector<std::string> affected;
};

// Failure policy for a node that exhausted its retries. A registered,
// still-pending fallback wins; otherwise required aborts the operation and
// optional skips the transitive dependents. A failing fallback node is
// judged by its primary's role.
PolicyDecision apply_failure_policy(const ExecutionGraph& graph, const std::string& failed_step);

class Engine {
public:
    Engine(std::shared_ptr<SpecRegistry> registry, std::shared_ptr<Invoker> invoker,
           EngineConfig config = {});

    // Resolve, build, schedule, aggregate, classify.
    ExecutionResult execute_operation(const RequestContext& request,
                                      const std::string& operation_name) const;

    // Same, for an already-resolved spec (CLI single-file runs, tests).
    ExecutionResult execute_spec(std::shared_ptr<const OperationSpec> spec,
                                 const RequestContext& request) const;

    const EngineConfig& config() const { return config_; }

private:
    std::shared_ptr<SpecRegistry> registry_;
    std::shared_ptr<Invoker> invoker_;
    EngineConfig config_;
};

std::string generate_request_id();

}  // namespace orchestron
