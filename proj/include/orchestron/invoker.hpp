#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "orchestron/planner.hpp"

namespace orchestron {

// Classified failure of one step attempt.
struct StepError {
    enum class Kind { timeout, transport, upstream_status, bind, transform };
    Kind kind = Kind::transport;
    std::string detail;
    std::optional<int> upstream_status_code;

    static StepError timeout(std::string detail) {
        return {Kind::timeout, std::move(detail), std::nullopt};
    }
    static StepError transport(std::string detail) {
        return {Kind::transport, std::move(detail), std::nullopt};
    }
    static StepError upstream(int status, std::string detail) {
        return {Kind::upstream_status, std::move(detail), status};
    }
    static StepError bind(std::string detail) {
        return {Kind::bind, std::move(detail), std::nullopt};
    }
    static StepError transform(std::string detail) {
        return {Kind::transform, std::move(detail), std::nullopt};
    }
};

const char* to_string(StepError::Kind kind);

// Cooperative cancellation shared between the scheduler and in-flight
// invocations. Copyable handle; all copies observe the same signal.
class CancellationToken {
public:
    CancellationToken() : state_(std::make_shared<State>()) {}

    void cancel() {
        {
            std::lock_guard lock(state_->mutex);
            state_->cancelled = true;
        }
        state_->cv.notify_all();
    }

    bool cancelled() const {
        std::lock_guard lock(state_->mutex);
        return state_->cancelled;
    }

    // Sleeps up to the given duration; returns true when woken by
    // cancellation before it elapsed.
    bool wait_for(std::chrono::milliseconds duration) const {
        std::unique_lock lock(state_->mutex);
        return state_->cv.wait_for(lock, duration, [this] { return state_->cancelled; });
    }

private:
    struct State {
        mutable std::mutex mutex;
        std::condition_variable_any cv;
        bool cancelled = false;
    };
    std::shared_ptr<State> state_;
};

// Invocation with every binding materialized; nothing left to resolve.
struct PreparedApi {
    std::string method;
    std::string path;
    std::string base_url_key;
};

struct PreparedWarehouse {
    std::string source_key;
    ParsedQuery query;
    std::vector<Json> param_values;     // one per where column, in order
};

struct PreparedTransform {
    TransformExpr expr;
    Json inputs = Json::object();       // step name -> completed payload
};

using PreparedInvocation = std::variant<PreparedApi, PreparedWarehouse, PreparedTransform>;

// What one invoker call needs to know.
struct StepCall {
    std::string step_name;
    PreparedInvocation invocation;
};

struct InvokeResult {
    Json payload;
    std::optional<StepError> error;

    bool ok() const { return !error.has_value(); }
    static InvokeResult success(Json payload) { return {std::move(payload), std::nullopt}; }
    static InvokeResult failure(StepError error) { return {Json(), std::move(error)}; }
};

// Uniform boundary over the target variants. Implementations must be safe
// for concurrent calls, return within attempt_timeout plus scheduling
// tolerance, and honor cancellation promptly (best-effort).
class Invoker {
public:
    virtual ~Invoker() = default;
    virtual InvokeResult invoke(const StepCall& call, std::chrono::milliseconds attempt_timeout,
                                const CancellationToken& cancel) = 0;
};

}  // namespace orchestron
