#include "orchestron/spec_model.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "orchestron/query.hpp"

namespace orchestron {

namespace {

// ---- YAML -> JSON tree -----------------------------------------------------

bool looks_like_int(const std::string& s) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + i, s.end(), [](unsigned char c) { return std::isdigit(c); });
}

Json yaml_scalar_to_json(const YAML::Node& node) {
    const std::string& s = node.Scalar();
    // Quoted scalars stay strings; plain scalars get the usual YAML typing.
    if (node.Tag() == "!") return Json(s);
    if (s == "null" || s == "~" || s.empty()) return Json(nullptr);
    if (s == "true" || s == "True") return Json(true);
    if (s == "false" || s == "False") return Json(false);
    if (looks_like_int(s)) {
        try {
            return Json(std::stoll(s));
        } catch (const std::exception&) {
            return Json(s);  // out-of-range digits
        }
    }
    try {
        size_t pos = 0;
        double d = std::stod(s, &pos);
        if (pos == s.size()) return Json(d);
    } catch (const std::exception&) {
    }
    return Json(s);
}

Json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
            return Json(nullptr);
        case YAML::NodeType::Scalar:
            return yaml_scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            Json arr = Json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            Json obj = Json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
        default:
            return Json(nullptr);
    }
}

// ---- field extraction ------------------------------------------------------

[[noreturn]] void missing_field(const std::string& field, const std::string& where) {
    throw ParseError("missing_field", "missing mandatory field '" + field + "' in " + where);
}

std::string require_string(const Json& obj, const std::string& field, const std::string& where) {
    if (!obj.contains(field)) missing_field(field, where);
    const Json& v = obj.at(field);
    if (!v.is_string())
        throw ParseError("bad_field", "field '" + field + "' in " + where + " must be a string");
    return v.get<std::string>();
}

std::optional<std::string> optional_string(const Json& obj, const std::string& field,
                                           const std::string& where) {
    if (!obj.contains(field) || obj.at(field).is_null()) return std::nullopt;
    const Json& v = obj.at(field);
    if (!v.is_string())
        throw ParseError("bad_field", "field '" + field + "' in " + where + " must be a string");
    return v.get<std::string>();
}

int optional_int(const Json& obj, const std::string& field, int fallback,
                 const std::string& where) {
    if (!obj.contains(field) || obj.at(field).is_null()) return fallback;
    const Json& v = obj.at(field);
    if (!v.is_number_integer())
        throw ParseError("bad_field", "field '" + field + "' in " + where + " must be an integer");
    return v.get<int>();
}

std::vector<std::string> string_list(const Json& obj, const std::string& field,
                                     const std::string& where) {
    std::vector<std::string> out;
    if (!obj.contains(field) || obj.at(field).is_null()) return out;
    const Json& v = obj.at(field);
    if (!v.is_array())
        throw ParseError("bad_field", "field '" + field + "' in " + where + " must be a list");
    for (const auto& item : v) {
        if (!item.is_string())
            throw ParseError("bad_field",
                             "field '" + field + "' in " + where + " must be a list of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

BindingSource parse_binding(const Json& value, const std::string& where) {
    if (value.is_string()) {
        const std::string s = value.get<std::string>();
        if (s.rfind("request.", 0) == 0) return BindingSource::request(s.substr(8));
        if (s.rfind("from_step.", 0) == 0) {
            std::string rest = s.substr(10);
            auto dot = rest.find('.');
            if (dot == std::string::npos) return BindingSource::from_step(rest, "");
            return BindingSource::from_step(rest.substr(0, dot), rest.substr(dot + 1));
        }
        // A bare name reads from the request parameter of that name.
        return BindingSource::request(s);
    }
    if (value.is_object() && value.contains("from_step")) {
        std::string ref = value.at("from_step").get<std::string>();
        auto dot = ref.find('.');
        if (dot == std::string::npos) return BindingSource::from_step(ref, "");
        return BindingSource::from_step(ref.substr(0, dot), ref.substr(dot + 1));
    }
    throw ParseError("bad_field", "unrecognized input binding in " + where);
}

RetryPolicy parse_retry(const Json& step, const std::string& where) {
    RetryPolicy retry;
    if (!step.contains("retry") || step.at("retry").is_null()) return retry;
    const Json& r = step.at("retry");
    if (!r.is_object())
        throw ParseError("bad_field", "field 'retry' in " + where + " must be a mapping");
    retry.max_attempts = optional_int(r, "max_attempts", 1, where);
    retry.backoff_ms = optional_int(r, "backoff_ms", 0, where);
    if (r.contains("retry_on")) {
        for (const auto& name : string_list(r, "retry_on", where)) {
            auto cls = retry_on_from_string(name);
            if (!cls)
                throw ParseError("bad_field", "unknown retry_on class '" + name + "' in " + where);
            retry.retry_on.insert(*cls);
        }
    } else {
        // retry block without explicit classes retries every retryable class
        retry.retry_on = {RetryOn::timeout, RetryOn::transport_error, RetryOn::upstream_5xx};
    }
    return retry;
}

StepSpec parse_step(const Json& step, int default_timeout_ms, size_t index) {
    const std::string where = "steps[" + std::to_string(index) + "]";
    if (!step.is_object()) throw ParseError("bad_field", where + " must be a mapping");

    StepSpec out;
    out.name = require_string(step, "name", where);
    const std::string here = "step '" + out.name + "'";

    std::string type = require_string(step, "type", here);
    if (type == "api") {
        ApiTarget api;
        api.method = require_string(step, "method", here);
        std::transform(api.method.begin(), api.method.end(), api.method.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        api.endpoint = require_string(step, "endpoint", here);
        api.base_url_key = optional_string(step, "base_url_key", here).value_or("default");
        out.target = api;
    } else if (type == "warehouse") {
        WarehouseTarget wh;
        wh.query = require_string(step, "query", here);
        wh.source_key = optional_string(step, "source_key", here).value_or("default");
        out.target = wh;
    } else if (type == "transform") {
        TransformTarget tf;
        tf.expr = require_string(step, "expr", here);
        out.target = tf;
    } else {
        throw ParseError("bad_field", "unknown step type '" + type + "' in " + here);
    }

    out.depends_on = string_list(step, "depends_on", here);
    if (auto role_name = optional_string(step, "role", here)) {
        auto role = role_from_string(*role_name);
        if (!role) throw ParseError("bad_field", "unknown role '" + *role_name + "' in " + here);
        out.role = *role;
    }
    out.fallback_for = optional_string(step, "fallback_for", here);
    if (out.fallback_for && !step.contains("role")) out.role = StepRole::fallback;
    out.timeout_ms = optional_int(step, "timeout_ms", default_timeout_ms, here);
    out.retry = parse_retry(step, here);

    if (step.contains("input_bindings") && !step.at("input_bindings").is_null()) {
        const Json& bindings = step.at("input_bindings");
        if (!bindings.is_object())
            throw ParseError("bad_field", "input_bindings in " + here + " must be a mapping");
        for (const auto& [key, value] : bindings.items())
            out.input_bindings[key] = parse_binding(value, here);
    }
    return out;
}

}  // namespace

Json parse_structured_text(const std::string& document) {
    // JSON is accepted alongside YAML; a leading '{' picks the JSON parser
    // so its error positions are reported accurately.
    auto first = document.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && document[first] == '{') {
        try {
            return Json::parse(document);
        } catch (const Json::parse_error& e) {
            int line = 1;
            for (size_t i = 0; i < e.byte && i < document.size(); ++i)
                if (document[i] == '\n') ++line;
            throw ParseError("malformed_json", e.what(), line);
        }
    }
    try {
        YAML::Node root = YAML::Load(document);
        return yaml_to_json(root);
    } catch (const YAML::Exception& e) {
        throw ParseError("malformed_yaml", e.msg, e.mark.line + 1, e.mark.column + 1);
    }
}

std::vector<std::string> endpoint_placeholders(const std::string& endpoint) {
    std::vector<std::string> out;
    size_t pos = 0;
    while ((pos = endpoint.find('{', pos)) != std::string::npos) {
        size_t end = endpoint.find('}', pos);
        if (end == std::string::npos) break;
        out.push_back(endpoint.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return out;
}

std::optional<TransformExpr> parse_transform_expr(const std::string& expr) {
    // name(arg, ...) where an arg is an identifier or [ident, ident, ...]
    auto is_ident = [](const std::string& s) {
        if (s.empty()) return false;
        if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
        return std::all_of(s.begin(), s.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
        });
    };
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        if (b == std::string::npos) return std::string();
        return s.substr(b, e - b + 1);
    };

    auto open = expr.find('(');
    if (open == std::string::npos || expr.back() != ')') return std::nullopt;
    TransformExpr out;
    out.name = trim(expr.substr(0, open));
    if (!is_ident(out.name)) return std::nullopt;

    std::string args = expr.substr(open + 1, expr.size() - open - 2);
    size_t i = 0;
    auto skip_ws = [&] { while (i < args.size() && std::isspace(static_cast<unsigned char>(args[i]))) ++i; };
    bool expect_arg = !trim(args).empty();
    while (expect_arg) {
        skip_ws();
        if (i >= args.size()) return std::nullopt;
        if (args[i] == '[') {
            size_t close = args.find(']', i);
            if (close == std::string::npos) return std::nullopt;
            std::string list = args.substr(i + 1, close - i - 1);
            std::stringstream ss(list);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!is_ident(item)) return std::nullopt;
                out.field_args.push_back(item);
            }
            i = close + 1;
        } else {
            size_t start = i;
            while (i < args.size() && args[i] != ',') ++i;
            std::string item = trim(args.substr(start, i - start));
            if (!is_ident(item)) return std::nullopt;
            out.step_args.push_back(item);
        }
        skip_ws();
        if (i >= args.size()) break;
        if (args[i] != ',') return std::nullopt;
        ++i;
    }
    return out;
}

OperationSpec parse_spec(const std::string& document) {
    Json tree = parse_structured_text(document);
    if (!tree.is_object()) throw ParseError("bad_document", "spec document must be a mapping");

    OperationSpec spec;
    spec.operation_name = require_string(tree, "operation", "document");
    spec.default_timeout_ms = optional_int(tree, "default_timeout_ms", 1000, "document");

    if (!tree.contains("steps")) missing_field("steps", "document");
    const Json& steps = tree.at("steps");
    if (!steps.is_array() && !steps.is_null())
        throw ParseError("bad_field", "field 'steps' must be a list");
    if (steps.is_array()) {
        for (size_t i = 0; i < steps.size(); ++i)
            spec.steps.push_back(parse_step(steps[i], spec.default_timeout_ms, i));
    }

    if (tree.contains("aggregation") && !tree.at("aggregation").is_null()) {
        const Json& agg = tree.at("aggregation");
        if (!agg.is_object())
            throw ParseError("bad_field", "field 'aggregation' must be a mapping");
        spec.aggregation.strategy = optional_string(agg, "strategy", "aggregation").value_or("merge");
        spec.aggregation.required_steps = string_list(agg, "required_steps", "aggregation");
    }
    return spec;
}

// ---- validation ------------------------------------------------------------

namespace {

struct Validator {
    const OperationSpec& spec;
    ValidationReport report;

    void error(std::string code, std::string step, std::string message) {
        report.errors.push_back({std::move(code), std::move(step), std::move(message)});
    }
    void warn(std::string code, std::string step, std::string message) {
        report.warnings.push_back({std::move(code), std::move(step), std::move(message)});
    }

    std::set<std::string> step_names() const {
        std::set<std::string> names;
        for (const auto& s : spec.steps) names.insert(s.name);
        return names;
    }

    void check_unique_names() {
        std::set<std::string> seen;
        for (const auto& s : spec.steps)
            if (!seen.insert(s.name).second)
                error("duplicate_step", s.name, "step name '" + s.name + "' is declared twice");
    }

    void check_references(const std::set<std::string>& names) {
        for (const auto& s : spec.steps) {
            for (const auto& dep : s.depends_on)
                if (!names.count(dep))
                    error("unknown_dependency", s.name,
                          "step '" + s.name + "' depends on unknown step '" + dep + "'");
        }
        for (const auto& req : spec.aggregation.required_steps)
            if (!names.count(req))
                error("unknown_required_step", "",
                      "aggregation.required_steps names unknown step '" + req + "'");
    }

    void check_fallbacks(const std::set<std::string>& names) {
        std::set<std::string> fallback_names;
        for (const auto& s : spec.steps)
            if (s.role == StepRole::fallback) fallback_names.insert(s.name);

        for (const auto& s : spec.steps) {
            const bool is_fallback = s.role == StepRole::fallback;
            if (is_fallback != s.fallback_for.has_value()) {
                error("fallback_role_mismatch", s.name,
                      "step '" + s.name + "' must have fallback_for iff role is fallback");
                continue;
            }
            if (!is_fallback) continue;

            const std::string& target = *s.fallback_for;
            if (!names.count(target)) {
                error("unknown_fallback_target", s.name,
                      "fallback '" + s.name + "' targets unknown step '" + target + "'");
            } else if (fallback_names.count(target)) {
                error("fallback_chain", s.name,
                      "fallback '" + s.name + "' targets fallback step '" + target + "'");
            }
            if (!s.depends_on.empty())
                error("fallback_has_dependencies", s.name,
                      "fallback '" + s.name + "' must not declare dependencies");
        }
        for (const auto& s : spec.steps)
            for (const auto& dep : s.depends_on)
                if (fallback_names.count(dep))
                    error("fallback_in_dependencies", s.name,
                          "step '" + s.name + "' depends on fallback step '" + dep + "'");

        // One fallback per primary keeps activation unambiguous.
        std::map<std::string, std::string> primary_to_fb;
        for (const auto& s : spec.steps) {
            if (s.role != StepRole::fallback || !s.fallback_for) continue;
            auto [it, inserted] = primary_to_fb.emplace(*s.fallback_for, s.name);
            if (!inserted)
                error("duplicate_fallback", s.name,
                      "step '" + *s.fallback_for + "' already has fallback '" + it->second + "'");
        }
    }

    // Iterative DFS; each back edge yields one cycle with full membership.
    void check_acyclic() {
        std::map<std::string, std::vector<std::string>> adj;
        for (const auto& s : spec.steps)
            for (const auto& dep : s.depends_on)
                if (spec.find_step(dep)) adj[dep].push_back(s.name);

        enum class Mark { unvisited, in_progress, done };
        std::map<std::string, Mark> marks;
        for (const auto& s : spec.steps) marks[s.name] = Mark::unvisited;

        std::vector<std::string> path;
        bool found_cycle = false;

        std::function<void(const std::string&)> dfs = [&](const std::string& node) {
            marks[node] = Mark::in_progress;
            path.push_back(node);
            for (const auto& next : adj[node]) {
                if (marks[next] == Mark::in_progress) {
                    auto start = std::find(path.begin(), path.end(), next);
                    std::vector<std::string> cycle(start, path.end());
                    std::string members;
                    for (const auto& m : cycle) members += (members.empty() ? "" : ", ") + m;
                    error("cycle", next, "dependency cycle through {" + members + "}");
                    found_cycle = true;
                } else if (marks[next] == Mark::unvisited) {
                    dfs(next);
                }
            }
            path.pop_back();
            marks[node] = Mark::done;
        };
        for (const auto& s : spec.steps)
            if (marks[s.name] == Mark::unvisited) dfs(s.name);
        (void)found_cycle;
    }

    void check_targets(const std::set<std::string>& names) {
        for (const auto& s : spec.steps) {
            std::set<std::string> deps(s.depends_on.begin(), s.depends_on.end());
            for (const auto& [ph, binding] : s.input_bindings) {
                if (binding.kind != BindingSource::Kind::from_step) continue;
                if (!names.count(binding.step))
                    error("unknown_binding_step", s.name,
                          "binding '" + ph + "' references unknown step '" + binding.step + "'");
                else if (!deps.count(binding.step))
                    error("binding_without_dependency", s.name,
                          "binding '" + ph + "' reads step '" + binding.step +
                              "' which is not in depends_on");
            }

            if (const auto* wh = std::get_if<WarehouseTarget>(&s.target)) {
                auto parsed = parse_query(wh->query);
                if (!parsed)
                    error("unsupported_query", s.name,
                          "query not in supported grammar: " + wh->query);
            } else if (const auto* tf = std::get_if<TransformTarget>(&s.target)) {
                auto expr = parse_transform_expr(tf->expr);
                if (!expr) {
                    error("bad_transform_expr", s.name, "unparseable transform: " + tf->expr);
                } else {
                    static const std::set<std::string> known = {"pick", "merge_inputs", "count"};
                    if (!known.count(expr->name))
                        error("unknown_transform", s.name, "unknown transform '" + expr->name + "'");
                    for (const auto& input : expr->step_args) {
                        if (!names.count(input))
                            error("unknown_binding_step", s.name,
                                  "transform input '" + input + "' is not a step");
                        else if (std::find(s.depends_on.begin(), s.depends_on.end(), input) ==
                                 s.depends_on.end())
                            error("transform_input_not_dependency", s.name,
                                  "transform input '" + input + "' is not in depends_on");
                    }
                }
            }
        }
    }

    void check_budgets() {
        for (const auto& s : spec.steps) {
            if (s.timeout_ms <= 0)
                error("bad_timeout", s.name, "timeout_ms must be positive");
            if (s.retry.max_attempts < 1)
                error("bad_retry", s.name, "retry.max_attempts must be >= 1");
            if (s.retry.backoff_ms < 0)
                error("bad_retry", s.name, "retry.backoff_ms must be non-negative");
            report.step_worst_case_ms[s.name] = worst_case_step_ms(s.retry, s.timeout_ms);
        }
    }

    void check_aggregation() {
        if (spec.aggregation.strategy != "merge")
            error("unknown_strategy", "",
                  "unknown aggregation strategy '" + spec.aggregation.strategy + "'");
        // required_steps naming a non-required step is tolerated: the union
        // is treated as required, but the disagreement is worth a warning.
        for (const auto& req : spec.aggregation.required_steps) {
            const StepSpec* s = spec.find_step(req);
            if (s && s->role != StepRole::required)
                warn("required_roles_mismatch", req,
                     "step '" + req + "' is listed in required_steps but has role " +
                         to_string(s->role));
        }
    }

    ValidationReport run() {
        check_unique_names();
        auto names = step_names();
        check_references(names);
        check_fallbacks(names);
        check_acyclic();
        check_targets(names);
        check_budgets();
        check_aggregation();
        report.valid = report.errors.empty();
        return report;
    }
};

}  // namespace

ValidationReport validate_spec(const OperationSpec& spec) {
    Validator v{spec, {}};
    return v.run();
}

// ---- serialization ---------------------------------------------------------

namespace {

Json binding_to_json(const BindingSource& b) {
    if (b.kind == BindingSource::Kind::request_param) return Json("request." + b.param);
    std::string ref = b.step;
    if (!b.json_path.empty()) ref += "." + b.json_path;
    return Json{{"from_step", ref}};
}

}  // namespace

Json spec_to_json(const OperationSpec& spec) {
    Json steps = Json::array();
    for (const auto& s : spec.steps) {
        Json step{{"name", s.name}, {"timeout_ms", s.timeout_ms}};
        if (const auto* api = std::get_if<ApiTarget>(&s.target)) {
            step["type"] = "api";
            step["method"] = api->method;
            step["endpoint"] = api->endpoint;
            step["base_url_key"] = api->base_url_key;
        } else if (const auto* wh = std::get_if<WarehouseTarget>(&s.target)) {
            step["type"] = "warehouse";
            step["query"] = wh->query;
            step["source_key"] = wh->source_key;
        } else if (const auto* tf = std::get_if<TransformTarget>(&s.target)) {
            step["type"] = "transform";
            step["expr"] = tf->expr;
        }
        if (!s.depends_on.empty()) step["depends_on"] = s.depends_on;
        step["role"] = to_string(s.role);
        if (s.fallback_for) step["fallback_for"] = *s.fallback_for;
        Json retry{{"max_attempts", s.retry.max_attempts}, {"backoff_ms", s.retry.backoff_ms}};
        Json retry_on = Json::array();
        for (const auto& cls : s.retry.retry_on) retry_on.push_back(to_string(cls));
        retry["retry_on"] = retry_on;
        step["retry"] = retry;
        if (!s.input_bindings.empty()) {
            Json bindings = Json::object();
            for (const auto& [ph, b] : s.input_bindings) bindings[ph] = binding_to_json(b);
            step["input_bindings"] = bindings;
        }
        steps.push_back(step);
    }
    return Json{{"operation", spec.operation_name},
                {"default_timeout_ms", spec.default_timeout_ms},
                {"steps", steps},
                {"aggregation",
                 Json{{"strategy", spec.aggregation.strategy},
                      {"required_steps", spec.aggregation.required_steps}}}};
}

std::string serialize_spec(const OperationSpec& spec) { return spec_to_json(spec).dump(2); }

Json ValidationReport::to_json() const {
    auto issues = [](const std::vector<ValidationIssue>& list) {
        Json arr = Json::array();
        for (const auto& i : list) {
            Json item{{"code", i.code}, {"message", i.message}};
            if (!i.step_name.empty()) item["step"] = i.step_name;
            arr.push_back(item);
        }
        return arr;
    };
    return Json{{"valid", valid},
                {"errors", issues(errors)},
                {"warnings", issues(warnings)},
                {"step_worst_case_ms", step_worst_case_ms}};
}

const char* to_string(StepRole role) {
    switch (role) {
        case StepRole::required: return "required";
        case StepRole::optional: return "optional";
        case StepRole::fallback: return "fallback";
    }
    return "required";
}

const char* to_string(RetryOn cls) {
    switch (cls) {
        case RetryOn::timeout: return "timeout";
        case RetryOn::transport_error: return "transport_error";
        case RetryOn::upstream_5xx: return "upstream_5xx";
    }
    return "timeout";
}

std::optional<StepRole> role_from_string(const std::string& s) {
    if (s == "required") return StepRole::required;
    if (s == "optional") return StepRole::optional;
    if (s == "fallback") return StepRole::fallback;
    return std::nullopt;
}

std::optional<RetryOn> retry_on_from_string(const std::string& s) {
    if (s == "timeout") return RetryOn::timeout;
    if (s == "transport_error") return RetryOn::transport_error;
    if (s == "upstream_5xx") return RetryOn::upstream_5xx;
    return std::nullopt;
}

}  // namespace orchestron
