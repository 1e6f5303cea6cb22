#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "orchestron/query.hpp"
#include "orchestron/spec_model.hpp"

namespace orchestron {

// One concrete request: the operation to run plus scalar parameters.
struct RequestContext {
    std::string operation_name;
    Json params = Json::object();       // scalar values only
    ResolutionContext resolution;
    std::string request_id;
};

enum class NodeState { pending, ready, running, completed, failed, skipped };

const char* to_string(NodeState state);

// A binding resolvable only after the producing step completed.
struct DeferredBinding {
    std::string step;
    std::string json_path;              // dot path, empty = whole payload
    bool operator==(const DeferredBinding&) const = default;
};

struct ResolvedApi {
    std::string method;
    std::string path;                   // request params substituted; deferred ones kept as {ph}
    std::string base_url_key;
    std::map<std::string, DeferredBinding> deferred;  // placeholder -> producer path
    bool operator==(const ResolvedApi&) const = default;
};

struct ResolvedWarehouse {
    std::string source_key;
    ParsedQuery query;
    struct Param {
        std::string column;
        std::optional<Json> value;                  // bound at build time
        std::optional<DeferredBinding> deferred;    // or resolved pre-invocation
        bool operator==(const Param&) const = default;
    };
    std::vector<Param> params;
    bool operator==(const ResolvedWarehouse&) const = default;
};

struct ResolvedTransform {
    TransformExpr expr;
    std::vector<std::string> input_steps;
    bool operator==(const ResolvedTransform&) const = default;
};

using ResolvedInvocation = std::variant<ResolvedApi, ResolvedWarehouse, ResolvedTransform>;

struct GraphNode {
    std::string name;
    ResolvedInvocation resolved_target;
    StepRole role = StepRole::required;
    int timeout_ms = 0;
    RetryPolicy retry;
    NodeState state = NodeState::pending;
    int unresolved_dep_count = 0;
    std::vector<std::string> depends_on;
    std::vector<std::string> dependents;
};

class BindError : public std::runtime_error {
public:
    BindError(std::string step, std::string placeholder, std::string message)
        : std::runtime_error(message), step_(std::move(step)),
          placeholder_(std::move(placeholder)) {}
    const std::string& step() const { return step_; }
    const std::string& placeholder() const { return placeholder_; }

private:
    std::string step_;
    std::string placeholder_;
};

class IllegalTransition : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Runtime DAG for one request. Mutation is single-writer: only the engine's
// scheduling thread calls the mark_* operations. Fallback nodes sit outside
// the dependency relation and wake up only via activate_fallback.
class ExecutionGraph {
public:
    const GraphNode& node(const std::string& name) const;
    GraphNode& node(const std::string& name);
    bool has_node(const std::string& name) const { return nodes_.count(name) > 0; }
    const std::vector<std::string>& order() const { return order_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    const std::map<std::string, std::string>& fallback_links() const { return fallback_links_; }
    std::optional<std::string> fallback_of(const std::string& primary) const;

    // Nodes in state ready, in spec declaration order.
    std::vector<std::string> ready_nodes() const;

    // Every transitive dependent of the given step, in declaration order.
    std::vector<std::string> transitive_dependents(const std::string& name) const;

    void mark_started(const std::string& name);                   // ready -> running
    std::vector<std::string> mark_completed(const std::string& name);  // returns newly ready
    void mark_failed(const std::string& name);                    // running -> failed
    void mark_skipped(const std::string& name);                   // pending -> skipped
    void activate_fallback(const std::string& name);              // pending -> ready

    // Dependents of a failed primary whose payload was substituted by its
    // fallback become eligible exactly as if the primary had completed.
    std::vector<std::string> propagate_fallback_completion(const std::string& primary);

    bool all_terminal() const;

private:
    friend ExecutionGraph build_execution_graph(const OperationSpec&, const RequestContext&);
    std::vector<std::string> decrement_dependents(const std::string& name);

    std::map<std::string, GraphNode> nodes_;
    std::vector<std::string> order_;                       // declaration order
    std::map<std::string, size_t> order_index_;
    std::vector<std::pair<std::string, std::string>> edges_;  // (from, to): to depends on from
    std::map<std::string, std::string> fallback_links_;    // primary -> fallback
};

// Derives the runtime graph: one node per step, edges exactly the depends_on
// relation, request-sourced placeholders substituted. Non-fallback roots
// start ready; everything else pending. Throws BindError when a request
// parameter is missing or a deferred binding references a non-dependency.
ExecutionGraph build_execution_graph(const OperationSpec& spec, const RequestContext& request);

struct PlanSummary {
    std::string operation_name;
    std::vector<std::vector<std::string>> layers;   // topological levels
    std::vector<std::string> critical_path;
    long long est_parallel_ms = 0;                  // longest path weight
    long long est_sequential_ms = 0;                // sum of estimates
    Json to_json() const;
};

// Static parallelism report over a validated spec. Estimates default to each
// step's timeout_ms; fallback steps are not part of the normal plan.
PlanSummary plan_summary(const OperationSpec& spec,
                         const std::map<std::string, long long>& latency_estimates = {});

}  // namespace orchestron
