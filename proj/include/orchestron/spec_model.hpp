#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace orchestron {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Operation specifications: the declarative source of truth for what a
// composite operation retrieves, in which order, and under which budgets.
// Parsing fills in defaults; validate_spec() decides semantic acceptability.
// ---------------------------------------------------------------------------

enum class StepRole { required, optional, fallback };

enum class RetryOn { timeout, transport_error, upstream_5xx };

struct RetryPolicy {
    int max_attempts = 1;
    int backoff_ms = 0;                 // fixed delay between attempts
    std::set<RetryOn> retry_on;         // error classes worth another attempt

    bool retries(RetryOn cls) const { return retry_on.count(cls) > 0; }
    bool operator==(const RetryPolicy&) const = default;
};

// Worst-case wall time for one step under its retry policy.
inline long long worst_case_step_ms(const RetryPolicy& retry, int timeout_ms) {
    return static_cast<long long>(retry.max_attempts) * timeout_ms +
           static_cast<long long>(retry.max_attempts - 1) * retry.backoff_ms;
}

struct ApiTarget {
    std::string method;                 // HTTP verb, upper-cased
    std::string endpoint;               // path template with {placeholder} segments
    std::string base_url_key = "default";
    bool operator==(const ApiTarget&) const = default;
};

struct WarehouseTarget {
    std::string query;                  // SELECT cols FROM table WHERE col = ? [AND col = ?]*
    std::string source_key = "default";
    bool operator==(const WarehouseTarget&) const = default;
};

struct TransformTarget {
    std::string expr;                   // e.g. pick(riskProfile, [score])
    bool operator==(const TransformTarget&) const = default;
};

using InvocationTarget = std::variant<ApiTarget, WarehouseTarget, TransformTarget>;

// Where an input placeholder gets its value from: a request parameter or a
// path into an upstream step's payload (resolved just before invocation).
struct BindingSource {
    enum class Kind { request_param, from_step };
    Kind kind = Kind::request_param;
    std::string param;                  // request field name
    std::string step;                   // producing step (from_step only)
    std::string json_path;              // dot path into the step payload, may be empty

    static BindingSource request(std::string field) {
        return {Kind::request_param, std::move(field), {}, {}};
    }
    static BindingSource from_step(std::string step, std::string path) {
        return {Kind::from_step, {}, std::move(step), std::move(path)};
    }
    bool operator==(const BindingSource&) const = default;
};

struct StepSpec {
    std::string name;
    InvocationTarget target;
    std::vector<std::string> depends_on;
    StepRole role = StepRole::required;
    std::optional<std::string> fallback_for;   // present iff role == fallback
    int timeout_ms = 0;                        // filled from spec default when omitted
    RetryPolicy retry;
    std::map<std::string, BindingSource> input_bindings;

    bool operator==(const StepSpec&) const = default;
};

struct AggregationSpec {
    std::string strategy = "merge";
    std::vector<std::string> required_steps;
    bool operator==(const AggregationSpec&) const = default;
};

struct OperationSpec {
    std::string operation_name;
    std::vector<StepSpec> steps;
    AggregationSpec aggregation;
    std::string version;                // registry-assigned, empty until loaded
    int default_timeout_ms = 1000;      // engine default when a step omits timeout_ms

    const StepSpec* find_step(const std::string& name) const {
        for (const auto& s : steps)
            if (s.name == name) return &s;
        return nullptr;
    }
    bool operator==(const OperationSpec&) const = default;
};

// Request-scoped inputs to configuration resolution.
struct ResolutionContext {
    std::string operation_name;
    std::optional<std::string> tenant;
    std::set<std::string> flags;                     // carried, unused by core resolver
    std::map<std::string, std::string> metadata;     // opaque
};

struct ValidationIssue {
    std::string code;
    std::string step_name;              // empty when spec-level
    std::string message;
    bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
    bool valid = true;                  // true iff errors empty
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;
    std::map<std::string, long long> step_worst_case_ms;  // retry-inclusive budget per step

    Json to_json() const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string code, std::string message, int line = -1, int column = -1)
        : std::runtime_error(message), code_(std::move(code)), line_(line), column_(column) {}
    const std::string& code() const { return code_; }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    std::string code_;
    int line_;
    int column_;
};

// Parsed form of a transform expression: name(step, ...) or
// pick(step, [field, ...]).
struct TransformExpr {
    std::string name;
    std::vector<std::string> step_args;
    std::vector<std::string> field_args;
    bool operator==(const TransformExpr&) const = default;
};

// Returns nullopt when the expression is not in the supported grammar.
std::optional<TransformExpr> parse_transform_expr(const std::string& expr);

// Placeholders found in an endpoint template, in order of appearance.
std::vector<std::string> endpoint_placeholders(const std::string& endpoint);

// Parses YAML or JSON text into one JSON tree (JSON when the first
// character is '{'). Throws ParseError with line/position on malformed text.
Json parse_structured_text(const std::string& document);

// Parses a YAML or JSON spec document. Applies defaults (role required,
// empty depends_on, retry {max_attempts: 1}, default timeout) and performs
// no semantic validation. Throws ParseError on malformed text or missing
// mandatory fields (operation, steps, per-step name/type).
OperationSpec parse_spec(const std::string& document);

// Semantic validation of every OperationSpec invariant. Never throws;
// problems are data in the report.
ValidationReport validate_spec(const OperationSpec& spec);

// Canonical JSON form of a spec. parse_spec(serialize_spec(s)) is
// structurally equal to s.
Json spec_to_json(const OperationSpec& spec);
std::string serialize_spec(const OperationSpec& spec);

const char* to_string(StepRole role);
const char* to_string(RetryOn cls);
std::optional<StepRole> role_from_string(const std::string& s);
std::optional<RetryOn> retry_on_from_string(const std::string& s);

}  // namespace orchestron
