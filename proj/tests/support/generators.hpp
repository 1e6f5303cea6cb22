// Deterministic random generators for property tests: DAG-shaped specs,
// specs with injected cycles or dangling references, and fixture tables.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "orchestron/spec_model.hpp"
#include "orchestron/warehouse.hpp"

namespace generators {

using orchestron::Json;

inline std::string step_name(size_t i) { return "step" + std::to_string(i); }

// Random DAG spec: edges only from lower to higher indices, so construction
// is acyclic by design. All steps are api targets with no placeholders.
inline orchestron::OperationSpec random_dag_spec(std::mt19937& rng, int max_steps = 20,
                                                 double edge_prob = 0.25) {
    std::uniform_int_distribution<int> size_dist(1, max_steps);
    std::bernoulli_distribution edge(edge_prob);

    orchestron::OperationSpec spec;
    spec.operation_name = "randomOp";
    int n = size_dist(rng);
    for (int i = 0; i < n; ++i) {
        orchestron::StepSpec step;
        step.name = step_name(i);
        orchestron::ApiTarget api;
        api.method = "GET";
        api.endpoint = "/steps/" + step.name;
        step.target = api;
        step.timeout_ms = 5000;
        for (int j = 0; j < i; ++j)
            if (edge(rng)) step.depends_on.push_back(step_name(j));
        spec.steps.push_back(std::move(step));
    }
    return spec;
}

// Half the output carries an injected defect: a dependency cycle, a dangling
// depends_on reference, or a dangling required_steps entry.
inline orchestron::OperationSpec random_spec_maybe_broken(std::mt19937& rng, bool inject_defect) {
    orchestron::OperationSpec spec = random_dag_spec(rng, 50, 0.2);
    if (!inject_defect) return spec;

    std::uniform_int_distribution<int> defect_dist(0, 2);
    std::uniform_int_distribution<size_t> pick(0, spec.steps.size() - 1);
    switch (defect_dist(rng)) {
        case 0: {  // cycle: make an earlier step depend on a later one
            size_t a = pick(rng), b = pick(rng);
            if (a == b) b = (a + 1) % spec.steps.size();
            size_t lo = std::min(a, b), hi = std::max(a, b);
            spec.steps[lo].depends_on.push_back(spec.steps[hi].name);
            if (std::find(spec.steps[hi].depends_on.begin(), spec.steps[hi].depends_on.end(),
                          spec.steps[lo].name) == spec.steps[hi].depends_on.end())
                spec.steps[hi].depends_on.push_back(spec.steps[lo].name);
            break;
        }
        case 1:
            spec.steps[pick(rng)].depends_on.push_back("ghostStep");
            break;
        default:
            spec.aggregation.required_steps.push_back("ghostStep");
            break;
    }
    return spec;
}

// Randomized fixture table with numeric and string columns.
inline orchestron::WarehouseStore::Table random_table(std::mt19937& rng, int max_rows = 1000) {
    std::uniform_int_distribution<int> rows_dist(0, max_rows);
    std::uniform_int_distribution<int> key_dist(0, 40);
    std::uniform_real_distribution<double> score_dist(0.0, 1.0);
    const std::vector<std::string> segments = {"standard", "premium", "watch", "new"};
    std::uniform_int_distribution<size_t> seg_dist(0, segments.size() - 1);

    orchestron::WarehouseStore::Table table;
    table.columns = {"customer_id", "score", "segment", "region"};
    int n = rows_dist(rng);
    for (int i = 0; i < n; ++i) {
        std::vector<Json> row;
        row.emplace_back("C" + std::to_string(key_dist(rng)));
        row.emplace_back(score_dist(rng));
        row.emplace_back(segments[seg_dist(rng)]);
        row.emplace_back(static_cast<long long>(key_dist(rng) % 5));
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace generators
