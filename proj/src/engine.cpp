#include "orchestron/engine.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace orchestron {

using Clock = std::chrono::steady_clock;

const char* to_string(SchedulingMode mode) {
    return mode == SchedulingMode::batch_wave ? "batch_wave" : "completion_driven";
}

std::optional<SchedulingMode> scheduling_mode_from_string(const std::string& s) {
    if (s == "batch_wave") return SchedulingMode::batch_wave;
    if (s == "completion_driven") return SchedulingMode::completion_driven;
    return std::nullopt;
}

const char* to_string(OperationError::Kind kind) {
    switch (kind) {
        case OperationError::Kind::not_found: return "not_found";
        case OperationError::Kind::bind_failed: return "bind_failed";
        case OperationError::Kind::required_step_failed: return "required_step_failed";
        case OperationError::Kind::deadline_exceeded: return "deadline_exceeded";
    }
    return "not_found";
}

std::string generate_request_id() {
    static thread_local std::mt19937_64 rng(
        std::random_device{}() ^
        static_cast<uint64_t>(Clock::now().time_since_epoch().count()));
    std::ostringstream out;
    out << "req-" << std::hex << rng();
    return out.str();
}

namespace {

int64_t ms_since(Clock::time_point epoch) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - epoch).count();
}

bool retryable(const StepError& error, const RetryPolicy& retry) {
    switch (error.kind) {
        case StepError::Kind::timeout:
            return retry.retries(RetryOn::timeout);
        case StepError::Kind::transport:
            return retry.retries(RetryOn::transport_error);
        case StepError::Kind::upstream_status:
            return error.upstream_status_code && *error.upstream_status_code >= 500 &&
                   retry.retries(RetryOn::upstream_5xx);
        case StepError::Kind::bind:
        case StepError::Kind::transform:
            return false;
    }
    return false;
}

}  // namespace

StepOutcome run_step(const StepRunPlan& plan, const StepCall& call, Invoker& invoker,
                     const CancellationToken& cancel, Clock::time_point epoch) {
    StepOutcome outcome;
    outcome.step_name = plan.name;
    outcome.started_ms = ms_since(epoch);

    for (int attempt = 1; attempt <= plan.retry.max_attempts; ++attempt) {
        outcome.attempts = attempt;
        InvokeResult result =
            invoker.invoke(call, std::chrono::milliseconds(plan.timeout_ms), cancel);
        if (result.ok()) {
            outcome.status = StepStatus::success;
            outcome.payload = std::move(result.payload);
            outcome.error.reset();
            break;
        }
        outcome.status = StepStatus::failed;
        outcome.error = std::move(result.error);
        bool may_retry = attempt < plan.retry.max_attempts &&
                         retryable(*outcome.error, plan.retry) && !cancel.cancelled();
        if (!may_retry) break;
        if (plan.retry.backoff_ms > 0 &&
            cancel.wait_for(std::chrono::milliseconds(plan.retry.backoff_ms)))
            break;  // cancelled mid-backoff
    }

    outcome.finished_ms = ms_since(epoch);
    outcome.duration_ms = outcome.finished_ms - outcome.started_ms;
    return outcome;
}

PolicyDecision apply_failure_policy(const ExecutionGraph& graph, const std::string& failed_step) {
    const GraphNode& node = graph.node(failed_step);

    std::string primary = failed_step;
    StepRole role = node.role;
    if (node.role == StepRole::fallback) {
        for (const auto& [p, f] : graph.fallback_links()) {
            if (f == failed_step) {
                primary = p;
                role = graph.node(p).role;
                break;
            }
        }
    } else {
        auto fb = graph.fallback_of(failed_step);
        if (fb && graph.node(*fb).state == NodeState::pending)
            return {PolicyDecision::Action::activate_fallback, {*fb}};
    }

    if (role == StepRole::required) {
        std::vector<std::string> affected;
        for (const auto& name : graph.order()) {
            if (name == failed_step) continue;
            NodeState state = graph.node(name).state;
            if (state == NodeState::pending || state == NodeState::ready ||
                state == NodeState::running)
                affected.push_back(name);
        }
        return {PolicyDecision::Action::abort_operation, std::move(affected)};
    }

    std::vector<std::string> affected;
    for (const auto& name : graph.transitive_dependents(primary))
        if (graph.node(name).state == NodeState::pending) affected.push_back(name);
    return {PolicyDecision::Action::skip_dependents, std::move(affected)};
}

// ---------------------------------------------------------------------------
// Scheduling loop
// ---------------------------------------------------------------------------

namespace {

// Outcome channel between detached workers and the scheduling thread. Workers
// hold it via shared_ptr, so an abandoned execution stays safe until the last
// late completion has been pushed.
struct CompletionQueue {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<StepOutcome> items;

    void push(StepOutcome outcome) {
        {
            std::lock_guard lock(mutex);
            items.push_back(std::move(outcome));
        }
        cv.notify_one();
    }

    std::optional<StepOutcome> pop_until(Clock::time_point deadline) {
        std::unique_lock lock(mutex);
        if (!cv.wait_until(lock, deadline, [this] { return !items.empty(); }))
            return std::nullopt;
        StepOutcome outcome = std::move(items.front());
        items.pop_front();
        return outcome;
    }
};

Json resolve_json_path(const Json& payload, const std::string& path) {
    if (path.empty()) return payload;
    const Json* current = &payload;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (current->is_object() && current->contains(part)) {
            current = &current->at(part);
        } else if (current->is_array() && !part.empty() &&
                   std::all_of(part.begin(), part.end(),
                               [](unsigned char c) { return std::isdigit(c); })) {
            size_t idx = std::stoul(part);
            if (idx >= current->size()) throw std::out_of_range(path);
            current = &(*current)[idx];
        } else {
            throw std::out_of_range(path);
        }
    }
    return *current;
}

std::string scalar_to_string(const Json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

// Per-execution scheduler. Owns the graph and trace exclusively; workers see
// only value copies plus the completion queue.
class OperationRun {
public:
    OperationRun(const OperationSpec& spec, const RequestContext& request,
                 std::shared_ptr<Invoker> invoker, const EngineConfig& config)
        : spec_(spec), request_(request), invoker_(std::move(invoker)), config_(config),
          queue_(std::make_shared<CompletionQueue>()) {}

    ExecutionResult run() {
        epoch_ = Clock::now();
        deadline_ = epoch_ + std::chrono::milliseconds(config_.operation_deadline_ms);
        trace_.request_id = request_.request_id;

        try {
            graph_ = build_execution_graph(spec_, request_);
        } catch (const BindError& e) {
            trace_.add(TraceEventType::operation_failed, e.step(), e.what());
            return finish_error({OperationError::Kind::bind_failed, e.step(), e.what()});
        }

        trace_.add(TraceEventType::graph_built, "",
                   std::to_string(graph_.order().size()) + " nodes, " +
                       std::to_string(graph_.edges().size()) + " edges");
        for (const auto& name : graph_.ready_nodes())
            trace_.add(TraceEventType::node_ready, name);

        if (config_.scheduling_mode == SchedulingMode::batch_wave)
            run_batch_wave();
        else
            run_completion_driven();

        return finalize();
    }

private:
    // ---- dispatch ----------------------------------------------------------

    void dispatch(const std::string& name) {
        graph_.mark_started(name);
        trace_.add(TraceEventType::node_started, name);
        GraphNode& node = graph_.node(name);

        StepCall call{name, {}};
        try {
            call.invocation = prepare(node);
        } catch (const StepError& e) {
            // Unresolvable deferred binding: the node fails without invoking.
            StepOutcome outcome;
            outcome.step_name = name;
            outcome.status = StepStatus::failed;
            outcome.error = e;
            outcome.attempts = 1;
            outcome.started_ms = outcome.finished_ms = ms_since(epoch_);
            queue_->push(std::move(outcome));
            ++in_flight_;
            return;
        }

        StepRunPlan plan{name, node.timeout_ms, node.retry};
        auto queue = queue_;
        auto invoker = invoker_;
        auto cancel = cancel_;
        auto epoch = epoch_;
        std::thread([plan = std::move(plan), call = std::move(call), queue, invoker, cancel,
                     epoch]() mutable {
            queue->push(run_step(plan, call, *invoker, cancel, epoch));
        }).detach();
        ++in_flight_;
    }

    // Materializes deferred bindings from completed results. Throws StepError
    // (kind bind) when a referenced payload path cannot be resolved.
    PreparedInvocation prepare(const GraphNode& node) {
        auto lookup = [&](const DeferredBinding& binding,
                          const std::string& placeholder) -> Json {
            auto it = results_.find(binding.step);
            if (it == results_.end())
                throw StepError::bind("no completed payload from step '" + binding.step +
                                      "' for '" + placeholder + "'");
            try {
                return resolve_json_path(it->second, binding.json_path);
            } catch (const std::out_of_range&) {
                throw StepError::bind("path '" + binding.json_path + "' not found in payload of '" +
                                      binding.step + "'");
            }
        };

        if (const auto* api = std::get_if<ResolvedApi>(&node.resolved_target)) {
            PreparedApi prepared{api->method, api->path, api->base_url_key};
            for (const auto& [placeholder, binding] : api->deferred) {
                std::string token = "{" + placeholder + "}";
                std::string value = scalar_to_string(lookup(binding, placeholder));
                auto pos = prepared.path.find(token);
                while (pos != std::string::npos) {
                    prepared.path.replace(pos, token.size(), value);
                    pos = prepared.path.find(token, pos);
                }
            }
            return prepared;
        }
        if (const auto* wh = std::get_if<ResolvedWarehouse>(&node.resolved_target)) {
            PreparedWarehouse prepared{wh->source_key, wh->query, {}};
            for (const auto& param : wh->params) {
                if (param.value)
                    prepared.param_values.push_back(*param.value);
                else
                    prepared.param_values.push_back(lookup(*param.deferred, param.column));
            }
            return prepared;
        }
        const auto& tf = std::get<ResolvedTransform>(node.resolved_target);
        PreparedTransform prepared{tf.expr, Json::object()};
        for (const auto& input : tf.input_steps) {
            auto it = results_.find(input);
            if (it == results_.end())
                throw StepError::bind("transform input '" + input + "' has no payload");
            prepared.inputs[input] = it->second;
        }
        return prepared;
    }

    // ---- completion processing ---------------------------------------------

    void handle_success(StepOutcome outcome) {
        const std::string name = outcome.step_name;
        const GraphNode& node = graph_.node(name);

        if (node.role == StepRole::fallback) {
            substitute_fallback(std::move(outcome));
            return;
        }
        results_[name] = outcome.payload;
        outcomes_[name] = std::move(outcome);
        auto newly_ready = graph_.mark_completed(name);
        trace_.add(TraceEventType::node_completed, name);
        announce_ready(newly_ready);
    }

    // Fallback success substitutes for the primary under the primary's name.
    void substitute_fallback(StepOutcome outcome) {
        const std::string fallback_name = outcome.step_name;
        std::string primary;
        for (const auto& [p, f] : graph_.fallback_links())
            if (f == fallback_name) primary = p;

        graph_.mark_completed(fallback_name);
        trace_.add(TraceEventType::node_completed, fallback_name,
                   "substitutes for " + primary);

        StepOutcome& merged = outcomes_[primary];
        merged.step_name = primary;
        merged.status = StepStatus::fallback_used;
        merged.payload = outcome.payload;
        merged.error.reset();
        merged.attempts += outcome.attempts;
        merged.finished_ms = outcome.finished_ms;
        merged.duration_ms = merged.finished_ms - merged.started_ms;

        results_[primary] = std::move(outcome.payload);
        failures_.erase(primary);
        announce_ready(graph_.propagate_fallback_completion(primary));
    }

    void record_failure(StepOutcome outcome) {
        const std::string name = outcome.step_name;
        graph_.mark_failed(name);
        trace_.add(TraceEventType::node_failed, name,
                   outcome.error ? std::string(to_string(outcome.error->kind)) + ": " +
                                       outcome.error->detail
                                 : "");
        // A failing fallback leaves the primary's recorded failure in place.
        if (graph_.node(name).role != StepRole::fallback) {
            failures_[name] = outcome.error.value_or(StepError::transport("unknown"));
            outcomes_[name] = std::move(outcome);
        }
    }

    void apply_policy(const std::string& failed_name) {
        const bool is_fallback = graph_.node(failed_name).role == StepRole::fallback;
        PolicyDecision decision = apply_failure_policy(graph_, failed_name);
        switch (decision.action) {
            case PolicyDecision::Action::activate_fallback: {
                const std::string& fb = decision.affected.front();
                graph_.activate_fallback(fb);
                trace_.add(TraceEventType::fallback_activated, fb,
                           "fallback for " + failed_name);
                announce_ready({fb});
                break;
            }
            case PolicyDecision::Action::skip_dependents:
                for (const auto& dep : decision.affected) skip_node(dep);
                break;
            case PolicyDecision::Action::abort_operation: {
                std::string culprit = is_fallback ? primary_of(failed_name) : failed_name;
                abort_operation(decision, {OperationError::Kind::required_step_failed, culprit,
                                           "required step failed: " + culprit});
                break;
            }
        }
    }

    void handle_failure(StepOutcome outcome) {
        std::string name = outcome.step_name;
        record_failure(std::move(outcome));
        apply_policy(name);
    }

    std::string primary_of(const std::string& fallback_name) const {
        for (const auto& [p, f] : graph_.fallback_links())
            if (f == fallback_name) return p;
        return fallback_name;
    }

    void skip_node(const std::string& name) {
        graph_.mark_skipped(name);
        trace_.add(TraceEventType::node_skipped, name);
        StepOutcome outcome;
        outcome.step_name = name;
        outcome.status = StepStatus::skipped;
        if (graph_.node(name).role != StepRole::fallback) outcomes_[name] = std::move(outcome);
    }

    void abort_operation(const PolicyDecision& decision, OperationError error) {
        cancel_.cancel();
        for (const auto& name : decision.affected) {
            NodeState state = graph_.node(name).state;
            if (state == NodeState::running) {
                graph_.mark_failed(name);
                trace_.add(TraceEventType::node_failed, name, "cancelled");
                StepOutcome outcome;
                outcome.step_name = name;
                outcome.status = StepStatus::failed;
                outcome.error = StepError::transport("cancelled");
                outcome.finished_ms = ms_since(epoch_);
                if (graph_.node(name).role != StepRole::fallback) {
                    failures_[name] = *outcome.error;
                    outcomes_[name] = std::move(outcome);
                }
            } else if (state == NodeState::pending || state == NodeState::ready) {
                skip_node(name);
            }
        }
        aborted_ = true;
        operation_error_ = std::move(error);
    }

    void handle_deadline() {
        cancel_.cancel();
        for (const auto& name : graph_.order()) {
            NodeState state = graph_.node(name).state;
            if (state == NodeState::running) {
                graph_.mark_failed(name);
                trace_.add(TraceEventType::node_failed, name, "operation deadline exceeded");
                StepOutcome outcome;
                outcome.step_name = name;
                outcome.status = StepStatus::failed;
                outcome.error = StepError::timeout("operation deadline exceeded");
                outcome.finished_ms = ms_since(epoch_);
                if (graph_.node(name).role != StepRole::fallback) {
                    failures_[name] = *outcome.error;
                    outcomes_[name] = std::move(outcome);
                }
            } else if (state == NodeState::pending || state == NodeState::ready) {
                skip_node(name);
            }
        }
        aborted_ = true;
        operation_error_ = OperationError{OperationError::Kind::deadline_exceeded, "",
                                          "operation deadline of " +
                                              std::to_string(config_.operation_deadline_ms) +
                                              " ms exceeded"};
    }

    void announce_ready(const std::vector<std::string>& names) {
        for (const auto& name : names) {
            trace_.add(TraceEventType::node_ready, name);
            ready_queue_.push_back(name);
        }
    }

    void process_outcome(StepOutcome outcome) {
        if (graph_.node(outcome.step_name).state != NodeState::running)
            return;  // late push after cancellation
        if (outcome.status == StepStatus::success)
            handle_success(std::move(outcome));
        else
            handle_failure(std::move(outcome));
    }

    // ---- scheduling modes --------------------------------------------------

    void run_completion_driven() {
        for (const auto& name : graph_.ready_nodes()) ready_queue_.push_back(name);

        auto fill_slots = [&] {
            while (!aborted_ && in_flight_ < config_.max_concurrency && !ready_queue_.empty()) {
                std::string name = ready_queue_.front();
                ready_queue_.pop_front();
                if (graph_.node(name).state != NodeState::ready) continue;
                dispatch(name);
            }
        };

        fill_slots();
        while (in_flight_ > 0) {
            auto outcome = queue_->pop_until(deadline_);
            if (!outcome) {
                handle_deadline();
                return;
            }
            --in_flight_;
            process_outcome(std::move(*outcome));
            if (aborted_) return;
            fill_slots();
        }
    }

    void run_batch_wave() {
        while (!aborted_) {
            std::vector<std::string> wave = graph_.ready_nodes();
            if (wave.empty()) break;

            std::map<std::string, StepOutcome> wave_outcomes;
            size_t next = 0;
            while (next < wave.size() && !aborted_) {
                // Dispatch one concurrency-capped slice of the wave and wait
                // for the whole slice before the next; readiness is only
                // recomputed after the full wave (barrier semantics).
                size_t begin = next;
                size_t end = std::min(wave.size(), begin + config_.max_concurrency);
                for (size_t i = begin; i < end; ++i) dispatch(wave[i]);
                next = end;

                while (in_flight_ > 0) {
                    auto outcome = queue_->pop_until(deadline_);
                    if (!outcome) {
                        handle_deadline();
                        return;
                    }
                    --in_flight_;
                    wave_outcomes[outcome->step_name] = std::move(*outcome);
                }
            }

            // Barrier passed: every wave output gets recorded. Completions
            // first, then failures, then failure policies; an abort stops
            // future waves but never falsifies an already-finished node.
            for (const auto& name : wave) {
                auto it = wave_outcomes.find(name);
                if (it == wave_outcomes.end() || it->second.status != StepStatus::success)
                    continue;
                handle_success(std::move(it->second));
            }
            std::vector<std::string> failed;
            for (const auto& name : wave) {
                auto it = wave_outcomes.find(name);
                if (it == wave_outcomes.end() || it->second.status == StepStatus::success)
                    continue;
                failed.push_back(name);
                record_failure(std::move(it->second));
            }
            for (const auto& name : failed) {
                if (aborted_) break;
                apply_policy(name);
            }
        }
    }

    // ---- finalization ------------------------------------------------------

    ExecutionResult finalize() {
        // Nodes never reached (unactivated fallbacks) end as skipped.
        for (const auto& name : graph_.order()) {
            NodeState state = graph_.node(name).state;
            if (state == NodeState::pending || state == NodeState::ready) skip_node(name);
        }

        CompositeResponse response;
        response.operation_name = spec_.operation_name;
        response.request_id = request_.request_id;
        response.payload = aggregate_results(spec_.aggregation, results_, failures_);
        auto [status, completeness] = validate_response(response.payload, outcomes_, spec_);
        response.status = status;
        response.outcomes = std::move(outcomes_);
        response.completeness = std::move(completeness);
        response.total_duration_ms = ms_since(epoch_);

        if (!operation_error_ && status == ResponseStatus::failed) {
            // Required data missing without an abort (e.g. a required step
            // skipped behind a failed optional dependency).
            std::string step = response.completeness.required_missing.empty()
                                   ? ""
                                   : response.completeness.required_missing.front();
            operation_error_ =
                OperationError{OperationError::Kind::required_step_failed, step,
                               "required step missing: " + step};
        }

        if (operation_error_)
            trace_.add(TraceEventType::operation_failed, operation_error_->step,
                       to_string(operation_error_->kind));
        else
            trace_.add(TraceEventType::operation_completed, "", to_string(status));

        ExecutionResult result;
        result.response = std::move(response);
        result.error = operation_error_;
        result.trace = std::move(trace_);
        return result;
    }

    ExecutionResult finish_error(OperationError error) {
        CompositeResponse response;
        response.operation_name = spec_.operation_name;
        response.request_id = request_.request_id;
        response.status = ResponseStatus::failed;
        response.total_duration_ms = ms_since(epoch_);
        ExecutionResult result;
        result.response = std::move(response);
        result.error = std::move(error);
        result.trace = std::move(trace_);
        return result;
    }

    const OperationSpec& spec_;
    const RequestContext& request_;
    std::shared_ptr<Invoker> invoker_;
    EngineConfig config_;

    ExecutionGraph graph_;
    ExecutionTrace trace_;
    CancellationToken cancel_;
    std::shared_ptr<CompletionQueue> queue_;
    Clock::time_point epoch_;
    Clock::time_point deadline_;

    std::map<std::string, Json> results_;
    std::map<std::string, StepError> failures_;
    std::map<std::string, StepOutcome> outcomes_;
    std::deque<std::string> ready_queue_;
    int in_flight_ = 0;
    bool aborted_ = false;
    std::optional<OperationError> operation_error_;
};

}  // namespace

Engine::Engine(std::shared_ptr<SpecRegistry> registry, std::shared_ptr<Invoker> invoker,
               EngineConfig config)
    : registry_(std::move(registry)), invoker_(std::move(invoker)), config_(config) {}

ExecutionResult Engine::execute_operation(const RequestContext& request,
                                          const std::string& operation_name) const {
    auto spec = resolve_configuration(operation_name, request.resolution, *registry_);
    if (!spec) {
        ExecutionResult result;
        result.response.operation_name = operation_name;
        result.response.request_id = request.request_id;
        result.response.status = ResponseStatus::failed;
        result.error = OperationError{OperationError::Kind::not_found, "",
                                      "no configuration for operation '" + operation_name + "'"};
        result.trace.request_id = request.request_id;
        result.trace.add(TraceEventType::operation_failed, "", "not_found");
        return result;
    }
    return execute_spec(std::move(spec), request);
}

ExecutionResult Engine::execute_spec(std::shared_ptr<const OperationSpec> spec,
                                     const RequestContext& request) const {
    RequestContext req = request;
    if (req.request_id.empty()) req.request_id = generate_request_id();
    OperationRun run(*spec, req, invoker_, config_);
    return run.run();
}

}  // namespace orchestron
