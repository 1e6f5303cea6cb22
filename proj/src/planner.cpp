#include "orchestron/planner.hpp"

#include <algorithm>
#include <set>

namespace orchestron {

const char* to_string(NodeState state) {
    switch (state) {
        case NodeState::pending: return "pending";
        case NodeState::ready: return "ready";
        case NodeState::running: return "running";
        case NodeState::completed: return "completed";
        case NodeState::failed: return "failed";
        case NodeState::skipped: return "skipped";
    }
    return "pending";
}

const GraphNode& ExecutionGraph::node(const std::string& name) const {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw std::out_of_range("no such node: " + name);
    return it->second;
}

GraphNode& ExecutionGraph::node(const std::string& name) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw std::out_of_range("no such node: " + name);
    return it->second;
}

std::optional<std::string> ExecutionGraph::fallback_of(const std::string& primary) const {
    auto it = fallback_links_.find(primary);
    if (it == fallback_links_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> ExecutionGraph::ready_nodes() const {
    std::vector<std::string> out;
    for (const auto& name : order_)
        if (nodes_.at(name).state == NodeState::ready) out.push_back(name);
    return out;
}

std::vector<std::string> ExecutionGraph::transitive_dependents(const std::string& name) const {
    std::set<std::string> seen;
    std::vector<std::string> stack{name};
    while (!stack.empty()) {
        std::string current = stack.back();
        stack.pop_back();
        for (const auto& dep : nodes_.at(current).dependents)
            if (seen.insert(dep).second) stack.push_back(dep);
    }
    std::vector<std::string> out;
    for (const auto& n : order_)
        if (seen.count(n)) out.push_back(n);
    return out;
}

void ExecutionGraph::mark_started(const std::string& name) {
    GraphNode& n = node(name);
    if (n.state != NodeState::ready)
        throw IllegalTransition("cannot start '" + name + "' from state " +
                                to_string(n.state));
    n.state = NodeState::running;
}

std::vector<std::string> ExecutionGraph::decrement_dependents(const std::string& name) {
    std::vector<std::string> newly_ready;
    for (const auto& dep_name : node(name).dependents) {
        GraphNode& dep = node(dep_name);
        if (dep.state != NodeState::pending) continue;
        if (--dep.unresolved_dep_count == 0) {
            dep.state = NodeState::ready;
            newly_ready.push_back(dep_name);
        }
    }
    std::sort(newly_ready.begin(), newly_ready.end(),
              [this](const std::string& a, const std::string& b) {
                  return order_index_.at(a) < order_index_.at(b);
              });
    return newly_ready;
}

std::vector<std::string> ExecutionGraph::mark_completed(const std::string& name) {
    GraphNode& n = node(name);
    if (n.state != NodeState::running)
        throw IllegalTransition("cannot complete '" + name + "' from state " +
                                to_string(n.state));
    n.state = NodeState::completed;
    return decrement_dependents(name);
}

void ExecutionGraph::mark_failed(const std::string& name) {
    GraphNode& n = node(name);
    if (n.state != NodeState::running)
        throw IllegalTransition("cannot fail '" + name + "' from state " + to_string(n.state));
    n.state = NodeState::failed;
}

void ExecutionGraph::mark_skipped(const std::string& name) {
    GraphNode& n = node(name);
    if (n.state != NodeState::pending && n.state != NodeState::ready)
        throw IllegalTransition("cannot skip '" + name + "' from state " + to_string(n.state));
    n.state = NodeState::skipped;
}

void ExecutionGraph::activate_fallback(const std::string& name) {
    GraphNode& n = node(name);
    if (n.role != StepRole::fallback)
        throw IllegalTransition("'" + name + "' is not a fallback node");
    if (n.state != NodeState::pending)
        throw IllegalTransition("cannot activate '" + name + "' from state " +
                                to_string(n.state));
    n.state = NodeState::ready;
}

std::vector<std::string> ExecutionGraph::propagate_fallback_completion(
    const std::string& primary) {
    GraphNode& n = node(primary);
    if (n.state != NodeState::failed)
        throw IllegalTransition("fallback substitution requires failed primary '" + primary +
                                "'");
    return decrement_dependents(primary);
}

bool ExecutionGraph::all_terminal() const {
    for (const auto& [name, n] : nodes_)
        if (n.state != NodeState::completed && n.state != NodeState::failed &&
            n.state != NodeState::skipped)
            return false;
    return true;
}

namespace {

Json bind_request_param(const RequestContext& request, const std::string& step,
                        const std::string& placeholder, const std::string& param) {
    if (!request.params.contains(param))
        throw BindError(step, placeholder,
                        "step '" + step + "': no request parameter '" + param +
                            "' for placeholder '" + placeholder + "'");
    return request.params.at(param);
}

std::string scalar_to_string(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Placeholder binding for one name: explicit input_bindings entry wins,
// otherwise the request parameter of the same name.
BindingSource binding_for(const StepSpec& step, const std::string& placeholder) {
    auto it = step.input_bindings.find(placeholder);
    if (it != step.input_bindings.end()) return it->second;
    return BindingSource::request(placeholder);
}

ResolvedInvocation resolve_target(const StepSpec& step, const RequestContext& request) {
    std::set<std::string> deps(step.depends_on.begin(), step.depends_on.end());

    auto check_deferred = [&](const BindingSource& b, const std::string& placeholder) {
        if (!deps.count(b.step))
            throw BindError(step.name, placeholder,
                            "step '" + step.name + "': deferred binding '" + placeholder +
                                "' references step '" + b.step + "' not in depends_on");
    };

    if (const auto* api = std::get_if<ApiTarget>(&step.target)) {
        ResolvedApi out{api->method, api->endpoint, api->base_url_key, {}};
        for (const auto& placeholder : endpoint_placeholders(api->endpoint)) {
            BindingSource b = binding_for(step, placeholder);
            if (b.kind == BindingSource::Kind::request_param) {
                Json v = bind_request_param(request, step.name, placeholder, b.param);
                std::string token = "{" + placeholder + "}";
                auto pos = out.path.find(token);
                while (pos != std::string::npos) {
                    out.path.replace(pos, token.size(), scalar_to_string(v));
                    pos = out.path.find(token, pos);
                }
            } else {
                check_deferred(b, placeholder);
                out.deferred[placeholder] = DeferredBinding{b.step, b.json_path};
            }
        }
        return out;
    }
    if (const auto* wh = std::get_if<WarehouseTarget>(&step.target)) {
        auto parsed = parse_query(wh->query);
        if (!parsed)
            throw BindError(step.name, "", "step '" + step.name + "': unsupported query");
        ResolvedWarehouse out{wh->source_key, *parsed, {}};
        for (const auto& column : parsed->where_columns) {
            BindingSource b = binding_for(step, column);
            ResolvedWarehouse::Param param{column, std::nullopt, std::nullopt};
            if (b.kind == BindingSource::Kind::request_param) {
                param.value = bind_request_param(request, step.name, column, b.param);
            } else {
                check_deferred(b, column);
                param.deferred = DeferredBinding{b.step, b.json_path};
            }
            out.params.push_back(std::move(param));
        }
        return out;
    }
    const auto& tf = std::get<TransformTarget>(step.target);
    auto expr = parse_transform_expr(tf.expr);
    if (!expr) throw BindError(step.name, "", "step '" + step.name + "': unparseable transform");
    ResolvedTransform out{*expr, expr->step_args};
    return out;
}

}  // namespace

ExecutionGraph build_execution_graph(const OperationSpec& spec, const RequestContext& request) {
    ExecutionGraph graph;
    for (const auto& step : spec.steps) {
        GraphNode node;
        node.name = step.name;
        node.resolved_target = resolve_target(step, request);
        node.role = step.role;
        node.timeout_ms = step.timeout_ms;
        node.retry = step.retry;
        node.depends_on = step.depends_on;
        node.unresolved_dep_count = static_cast<int>(step.depends_on.size());
        node.state = (step.role != StepRole::fallback && step.depends_on.empty())
                         ? NodeState::ready
                         : NodeState::pending;
        graph.order_index_[step.name] = graph.order_.size();
        graph.order_.push_back(step.name);
        graph.nodes_.emplace(step.name, std::move(node));
        if (step.role == StepRole::fallback && step.fallback_for)
            graph.fallback_links_[*step.fallback_for] = step.name;
    }
    for (const auto& step : spec.steps) {
        for (const auto& dep : step.depends_on) {
            graph.edges_.emplace_back(dep, step.name);
            graph.nodes_.at(dep).dependents.push_back(step.name);
        }
    }
    return graph;
}

PlanSummary plan_summary(const OperationSpec& spec,
                         const std::map<std::string, long long>& latency_estimates) {
    PlanSummary out;
    out.operation_name = spec.operation_name;

    auto estimate = [&](const StepSpec& step) -> long long {
        auto it = latency_estimates.find(step.name);
        return it != latency_estimates.end() ? it->second : step.timeout_ms;
    };

    // Level = 1 + max level over dependencies; longest-path DP in the same
    // sweep (steps are iterated until fixpoint since declaration order is
    // not necessarily topological).
    std::map<std::string, int> level;
    std::map<std::string, long long> path_weight;
    std::map<std::string, std::string> path_prev;

    std::vector<const StepSpec*> plan_steps;
    for (const auto& s : spec.steps)
        if (s.role != StepRole::fallback) plan_steps.push_back(&s);

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto* s : plan_steps) {
            int lvl = 0;
            long long weight = estimate(*s);
            std::string prev;
            for (const auto& dep : s->depends_on) {
                auto it = level.find(dep);
                if (it != level.end()) lvl = std::max(lvl, it->second + 1);
                auto wit = path_weight.find(dep);
                if (wit != path_weight.end() && wit->second + estimate(*s) > weight) {
                    weight = wit->second + estimate(*s);
                    prev = dep;
                }
            }
            if (!level.count(s->name) || level[s->name] != lvl ||
                path_weight[s->name] != weight) {
                level[s->name] = lvl;
                path_weight[s->name] = weight;
                path_prev[s->name] = prev;
                changed = true;
            }
        }
    }

    int max_level = -1;
    for (const auto* s : plan_steps) max_level = std::max(max_level, level[s->name]);
    out.layers.assign(max_level + 1, {});
    for (const auto* s : plan_steps) out.layers[level[s->name]].push_back(s->name);

    std::string tail;
    for (const auto* s : plan_steps) {
        out.est_sequential_ms += estimate(*s);
        if (tail.empty() || path_weight[s->name] > out.est_parallel_ms) {
            out.est_parallel_ms = path_weight[s->name];
            tail = s->name;
        }
    }
    while (!tail.empty()) {
        out.critical_path.insert(out.critical_path.begin(), tail);
        tail = path_prev[tail];
    }
    return out;
}

Json PlanSummary::to_json() const {
    Json layers_json = Json::array();
    for (const auto& layer : layers) layers_json.push_back(layer);
    return Json{{"operation", operation_name},
                {"layers", layers_json},
                {"critical_path", critical_path},
                {"est_parallel_ms", est_parallel_ms},
                {"est_sequential_ms", est_sequential_ms}};
}

}  // namespace orchestron
