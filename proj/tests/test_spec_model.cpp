#include <random>

#include "doctest.h"

#include "orchestron/spec_model.hpp"

#include "fixtures.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace orchestron;

TEST_CASE("parse customer360 listing") {
    OperationSpec spec = parse_spec(fixtures::kCustomer360Yaml);

    CHECK(spec.operation_name == "customer360");
    REQUIRE(spec.steps.size() == 4);
    CHECK(spec.steps[0].name == "accountService");
    CHECK(spec.steps[1].name == "transactionService");
    CHECK(spec.steps[2].name == "fraudSignals");
    CHECK(spec.steps[3].name == "riskProfile");

    CHECK(spec.steps[0].timeout_ms == 500);
    CHECK(spec.steps[1].timeout_ms == 800);
    CHECK(spec.steps[2].timeout_ms == 400);
    CHECK(spec.steps[3].timeout_ms == 1200);

    const auto& account = std::get<ApiTarget>(spec.steps[0].target);
    CHECK(account.method == "GET");
    CHECK(account.endpoint == "/accounts/{customer_id}");

    const auto& risk = std::get<WarehouseTarget>(spec.steps[3].target);
    CHECK(risk.query == "SELECT score, segment FROM risk_profiles WHERE customer_id = ?");

    CHECK(spec.aggregation.strategy == "merge");
    CHECK(spec.aggregation.required_steps ==
          std::vector<std::string>{"accountService", "transactionService"});

    // Defaults fill in what the listing leaves out.
    for (const auto& step : spec.steps) {
        CHECK(step.role == StepRole::required);
        CHECK(step.depends_on.empty());
        CHECK(step.retry.max_attempts == 1);
    }
}

TEST_CASE("parse accepts empty step list") {
    OperationSpec spec = parse_spec("operation: x\nsteps: []\n");
    CHECK(spec.operation_name == "x");
    CHECK(spec.steps.empty());
}

TEST_CASE("parse applies default timeout when a step omits one") {
    std::string doc = R"(operation: customer360
steps:
  - name: accountService
    type: api
    method: GET
    endpoint: /accounts/{customer_id}
)";
    OperationSpec spec = parse_spec(doc);
    REQUIRE(spec.steps.size() == 1);
    CHECK(spec.steps[0].timeout_ms == 1000);
    CHECK(spec.steps[0].timeout_ms == spec.default_timeout_ms);
}

TEST_CASE("parse accepts the JSON form of the same tree") {
    std::string doc = R"({
      "operation": "customer360",
      "steps": [
        {"name": "accountService", "type": "api", "method": "GET",
         "endpoint": "/accounts/{customer_id}", "timeout_ms": 500}
      ],
      "aggregation": {"strategy": "merge", "required_steps": ["accountService"]}
    })";
    OperationSpec spec = parse_spec(doc);
    CHECK(spec.operation_name == "customer360");
    REQUIRE(spec.steps.size() == 1);
    CHECK(spec.steps[0].timeout_ms == 500);
}

TEST_CASE("parse rejects missing mandatory fields") {
    CHECK_THROWS_WITH_AS(parse_spec("steps: []\n"),
                         "missing mandatory field 'operation' in document", ParseError);
    CHECK_THROWS_AS(parse_spec("operation: x\n"), ParseError);
    CHECK_THROWS_AS(parse_spec("operation: x\nsteps:\n  - type: api\n"), ParseError);
    CHECK_THROWS_AS(parse_spec("operation: x\nsteps:\n  - name: a\n"), ParseError);
}

TEST_CASE("parse reports position for malformed text") {
    try {
        parse_spec("operation: x\nsteps:\n  - name: [unclosed\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() >= 1);
    }
}

TEST_CASE("parse retry and role fields") {
    std::string doc = R"(operation: x
steps:
  - name: a
    type: api
    method: get
    endpoint: /a
    timeout_ms: 100
    retry:
      max_attempts: 3
      backoff_ms: 50
      retry_on: [upstream_5xx]
  - name: b
    type: api
    method: GET
    endpoint: /b
    timeout_ms: 100
    role: optional
  - name: c
    type: api
    method: GET
    endpoint: /c
    timeout_ms: 100
    fallback_for: a
)";
    OperationSpec spec = parse_spec(doc);
    CHECK(std::get<ApiTarget>(spec.steps[0].target).method == "GET");  // verb upper-cased
    CHECK(spec.steps[0].retry.max_attempts == 3);
    CHECK(spec.steps[0].retry.backoff_ms == 50);
    CHECK(spec.steps[0].retry.retry_on == std::set<RetryOn>{RetryOn::upstream_5xx});
    CHECK(spec.steps[1].role == StepRole::optional);
    // fallback_for implies the fallback role when none is given
    CHECK(spec.steps[2].role == StepRole::fallback);
    CHECK(spec.steps[2].fallback_for == "a");
}

TEST_CASE("parse input bindings in both forms") {
    std::string doc = R"(operation: x
steps:
  - name: a
    type: api
    method: GET
    endpoint: /a/{cid}
    timeout_ms: 100
    input_bindings:
      cid: request.customer_id
  - name: b
    type: api
    method: GET
    endpoint: /b/{aid}
    timeout_ms: 100
    depends_on: [a]
    input_bindings:
      aid:
        from_step: a.account.id
)";
    OperationSpec spec = parse_spec(doc);
    CHECK(spec.steps[0].input_bindings.at("cid") == BindingSource::request("customer_id"));
    CHECK(spec.steps[1].input_bindings.at("aid") == BindingSource::from_step("a", "account.id"));
}

TEST_CASE("validate accepts customer360") {
    ValidationReport report = validate_spec(parse_spec(fixtures::kCustomer360Yaml));
    CHECK(report.valid);
    CHECK(report.errors.empty());
}

TEST_CASE("validate flags the smallest cycle with full membership") {
    ValidationReport report = validate_spec(parse_spec(fixtures::kCyclicYaml));
    REQUIRE_FALSE(report.valid);
    bool found = false;
    for (const auto& e : report.errors) {
        if (e.code != "cycle") continue;
        found = true;
        CHECK(e.message.find("A") != std::string::npos);
        CHECK(e.message.find("B") != std::string::npos);
    }
    CHECK(found);
}

TEST_CASE("validate flags dangling required_steps reference") {
    OperationSpec spec = parse_spec(fixtures::kCustomer360Yaml);
    spec.aggregation.required_steps.push_back("ghostService");
    ValidationReport report = validate_spec(spec);
    REQUIRE_FALSE(report.valid);
    bool found = false;
    for (const auto& e : report.errors)
        if (e.code == "unknown_required_step" &&
            e.message.find("ghostService") != std::string::npos)
            found = true;
    CHECK(found);
}

TEST_CASE("validate flags duplicate names and bad budgets") {
    OperationSpec spec = parse_spec(fixtures::kCustomer360Yaml);
    spec.steps.push_back(spec.steps[0]);
    spec.steps.back().timeout_ms = 0;
    spec.steps.back().retry.max_attempts = 0;
    ValidationReport report = validate_spec(spec);
    REQUIRE_FALSE(report.valid);
    std::set<std::string> codes;
    for (const auto& e : report.errors) codes.insert(e.code);
    CHECK(codes.count("duplicate_step"));
    CHECK(codes.count("bad_timeout"));
    CHECK(codes.count("bad_retry"));
}

TEST_CASE("validate fallback shape rules") {
    std::string doc = R"(operation: x
steps:
  - name: a
    type: api
    method: GET
    endpoint: /a
    timeout_ms: 100
  - name: fb
    type: api
    method: GET
    endpoint: /fb
    timeout_ms: 100
    role: fallback
    fallback_for: a
  - name: fb2
    type: api
    method: GET
    endpoint: /fb2
    timeout_ms: 100
    role: fallback
    fallback_for: fb
  - name: c
    type: api
    method: GET
    endpoint: /c
    timeout_ms: 100
    depends_on: [fb]
)";
    ValidationReport report = validate_spec(parse_spec(doc));
    REQUIRE_FALSE(report.valid);
    std::set<std::string> codes;
    for (const auto& e : report.errors) codes.insert(e.code);
    CHECK(codes.count("fallback_chain"));           // fb2 targets a fallback
    CHECK(codes.count("fallback_in_dependencies")); // c depends on fb
}

TEST_CASE("validate transform and query grammar") {
    std::string doc = R"(operation: x
steps:
  - name: rows
    type: warehouse
    query: SELECT * FROM t
    timeout_ms: 100
  - name: shape
    type: transform
    expr: pick(rows, [score])
    timeout_ms: 100
  - name: odd
    type: transform
    expr: explode(rows)
    timeout_ms: 100
    depends_on: [rows]
)";
    ValidationReport report = validate_spec(parse_spec(doc));
    REQUIRE_FALSE(report.valid);
    std::set<std::string> codes;
    for (const auto& e : report.errors) codes.insert(e.code);
    CHECK(codes.count("unsupported_query"));             // SELECT *
    CHECK(codes.count("transform_input_not_dependency")); // pick input not declared
    CHECK(codes.count("unknown_transform"));             // explode
}

TEST_CASE("required_steps naming an optional step warns, not errors") {
    OperationSpec spec = parse_spec(fixtures::kCustomer360Yaml);
    spec.steps[2].role = StepRole::optional;  // fraudSignals
    spec.aggregation.required_steps.push_back("fraudSignals");
    ValidationReport report = validate_spec(spec);
    CHECK(report.valid);
    bool warned = false;
    for (const auto& w : report.warnings)
        if (w.code == "required_roles_mismatch" && w.step_name == "fraudSignals") warned = true;
    CHECK(warned);
}

TEST_CASE("validation reports retry-inclusive worst-case step budgets") {
    std::string doc = R"(operation: x
steps:
  - name: a
    type: api
    method: GET
    endpoint: /a
    timeout_ms: 500
    retry:
      max_attempts: 3
      backoff_ms: 100
)";
    ValidationReport report = validate_spec(parse_spec(doc));
    CHECK(report.step_worst_case_ms.at("a") == 3 * 500 + 2 * 100);
}

TEST_CASE("serialize/parse round-trip is structurally lossless") {
    OperationSpec original = parse_spec(fixtures::kCustomer360Yaml);
    OperationSpec reparsed = parse_spec(serialize_spec(original));
    CHECK(original == reparsed);

    std::mt19937 rng(20240817);
    for (int i = 0; i < 50; ++i) {
        OperationSpec spec = generators::random_dag_spec(rng);
        CHECK(parse_spec(serialize_spec(spec)) == spec);
    }
}

TEST_CASE("validation is pure: same spec, same report") {
    OperationSpec spec = parse_spec(fixtures::kCyclicYaml);
    ValidationReport a = validate_spec(spec);
    ValidationReport b = validate_spec(spec);
    CHECK(a.valid == b.valid);
    CHECK(a.errors == b.errors);
    CHECK(a.warnings == b.warnings);
}

TEST_CASE("validate verdicts match the independent oracle on random specs") {
    std::mt19937 rng(911);
    for (int i = 0; i < 300; ++i) {
        OperationSpec spec = generators::random_spec_maybe_broken(rng, i % 2 == 0);
        bool expected = oracles::spec_valid_oracle(spec);
        CHECK(validate_spec(spec).valid == expected);
    }
}

TEST_CASE("transform expression grammar") {
    auto expr = parse_transform_expr("pick(riskProfile, [score, segment])");
    REQUIRE(expr.has_value());
    CHECK(expr->name == "pick");
    CHECK(expr->step_args == std::vector<std::string>{"riskProfile"});
    CHECK(expr->field_args == std::vector<std::string>{"score", "segment"});

    auto merge = parse_transform_expr("merge_inputs(a, b, c)");
    REQUIRE(merge.has_value());
    CHECK(merge->step_args == std::vector<std::string>{"a", "b", "c"});

    CHECK_FALSE(parse_transform_expr("pick riskProfile").has_value());
    CHECK_FALSE(parse_transform_expr("pick(a,").has_value());
    CHECK_FALSE(parse_transform_expr("(a)").has_value());
}
