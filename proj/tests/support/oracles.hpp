// Test-only oracles, kept independent of the implementation paths they
// check: Kahn's algorithm for cycle detection, edge-set rescans for
// readiness, a truth table for response classification, and a linear-scan
// row filter for warehouse queries.
#pragma once

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "orchestron/aggregation.hpp"
#include "orchestron/spec_model.hpp"
#include "orchestron/warehouse.hpp"

namespace oracles {

using orchestron::Json;

// Kahn's algorithm. Returns false when the dependency relation has a cycle.
// Nodes: names; edges: (from, to) meaning `to` depends on `from`.
inline bool kahn_is_acyclic(const std::vector<std::string>& nodes,
                            const std::vector<std::pair<std::string, std::string>>& edges) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& n : nodes) indegree[n] = 0;
    for (const auto& [from, to] : edges) {
        adj[from].push_back(to);
        indegree[to]++;
    }
    std::deque<std::string> queue;
    for (const auto& [n, d] : indegree)
        if (d == 0) queue.push_back(n);
    size_t visited = 0;
    while (!queue.empty()) {
        std::string n = queue.front();
        queue.pop_front();
        ++visited;
        for (const auto& next : adj[n])
            if (--indegree[next] == 0) queue.push_back(next);
    }
    return visited == nodes.size();
}

// Independent validity check over a spec: unique names, resolvable
// references, acyclic dependencies, fallback shape. Mirrors the documented
// invariants directly rather than reusing validate_spec's machinery.
inline bool spec_valid_oracle(const orchestron::OperationSpec& spec) {
    using orchestron::StepRole;
    std::set<std::string> names;
    for (const auto& s : spec.steps)
        if (!names.insert(s.name).second) return false;

    std::set<std::string> fallbacks;
    for (const auto& s : spec.steps)
        if (s.role == StepRole::fallback) fallbacks.insert(s.name);

    for (const auto& s : spec.steps) {
        for (const auto& d : s.depends_on) {
            if (!names.count(d)) return false;
            if (fallbacks.count(d)) return false;
        }
        if ((s.role == StepRole::fallback) != s.fallback_for.has_value()) return false;
        if (s.fallback_for) {
            if (!names.count(*s.fallback_for) || fallbacks.count(*s.fallback_for)) return false;
            if (!s.depends_on.empty()) return false;
        }
        if (s.timeout_ms <= 0) return false;
        if (s.retry.max_attempts < 1) return false;
    }
    for (const auto& r : spec.aggregation.required_steps)
        if (!names.count(r)) return false;

    std::vector<std::string> node_list(names.begin(), names.end());
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& s : spec.steps)
        for (const auto& d : s.depends_on) edges.emplace_back(d, s.name);
    return kahn_is_acyclic(node_list, edges);
}

// Brute-force readiness: a step is ready iff it has not run and every
// dependency is in the completed set. Recomputed from the full edge set.
inline std::set<std::string> ready_oracle(
    const std::vector<std::string>& nodes,
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::set<std::string>& completed, const std::set<std::string>& started) {
    std::map<std::string, std::vector<std::string>> deps;
    for (const auto& [from, to] : edges) deps[to].push_back(from);
    std::set<std::string> ready;
    for (const auto& n : nodes) {
        if (completed.count(n) || started.count(n)) continue;
        bool ok = true;
        for (const auto& d : deps[n])
            if (!completed.count(d)) {
                ok = false;
                break;
            }
        if (ok) ready.insert(n);
    }
    return ready;
}

// Truth table for composite status: failed when any required step lacks a
// payload, else partial when any optional step lacks one, else complete.
// fallback_used counts as present.
inline orchestron::ResponseStatus status_oracle(
    const std::vector<std::pair<orchestron::StepRole, orchestron::StepStatus>>& steps) {
    using orchestron::ResponseStatus;
    using orchestron::StepRole;
    using orchestron::StepStatus;
    bool required_missing = false;
    bool optional_missing = false;
    for (const auto& [role, status] : steps) {
        bool present = status == StepStatus::success || status == StepStatus::fallback_used;
        if (role == StepRole::required && !present) required_missing = true;
        if (role == StepRole::optional && !present) optional_missing = true;
    }
    if (required_missing) return ResponseStatus::failed;
    if (optional_missing) return ResponseStatus::partial;
    return ResponseStatus::complete;
}

// Linear scan with an explicit predicate, the reference for invoke_warehouse.
inline Json warehouse_oracle(const orchestron::WarehouseStore::Table& table,
                             const std::vector<std::string>& select,
                             const std::vector<std::string>& where,
                             const std::vector<Json>& params) {
    auto index_of = [&](const std::string& col) {
        for (size_t i = 0; i < table.columns.size(); ++i)
            if (table.columns[i] == col) return static_cast<long>(i);
        return -1L;
    };
    auto eq = [](const Json& cell, const Json& param) {
        if (cell.is_number() && param.is_string()) {
            try {
                size_t pos = 0;
                double d = std::stod(param.get<std::string>(), &pos);
                return pos == param.get<std::string>().size() && cell.get<double>() == d;
            } catch (const std::exception&) {
                return false;
            }
        }
        if (cell.is_string() && param.is_number()) {
            try {
                size_t pos = 0;
                double d = std::stod(cell.get<std::string>(), &pos);
                return pos == cell.get<std::string>().size() && param.get<double>() == d;
            } catch (const std::exception&) {
                return false;
            }
        }
        if (cell.is_number() && param.is_number())
            return cell.get<double>() == param.get<double>();
        return cell == param;
    };

    Json rows = Json::array();
    for (const auto& row : table.rows) {
        bool match = true;
        for (size_t p = 0; p < where.size(); ++p) {
            long idx = index_of(where[p]);
            if (idx < 0 || !eq(row[idx], params[p])) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        Json out = Json::object();
        for (const auto& col : select) {
            long idx = index_of(col);
            out[col] = row[idx];
        }
        rows.push_back(out);
    }
    return Json{{"rows", rows}, {"row_count", rows.size()}};
}

}  // namespace oracles
