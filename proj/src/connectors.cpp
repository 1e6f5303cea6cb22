#include "orchestron/connectors.hpp"

#include <chrono>

#include "httplib.h"

namespace orchestron {

namespace {

// "http://host:port" -> (host, port). Scheme optional, https unsupported.
bool split_base_url(const std::string& base, std::string& host, int& port) {
    std::string rest = base;
    auto scheme = rest.find("://");
    if (scheme != std::string::npos) {
        if (rest.substr(0, scheme) != "http") return false;
        rest = rest.substr(scheme + 3);
    }
    auto slash = rest.find('/');
    if (slash != std::string::npos) rest = rest.substr(0, slash);
    auto colon = rest.find(':');
    if (colon == std::string::npos) {
        host = rest;
        port = 80;
        return !host.empty();
    }
    host = rest.substr(0, colon);
    try {
        port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
        return false;
    }
    return !host.empty();
}

Json parse_body(const std::string& body) {
    try {
        return Json::parse(body);
    } catch (const Json::parse_error&) {
        return Json{{"raw", body}};  // tolerant reads for non-JSON 2xx bodies
    }
}

}  // namespace

InvokeResult invoke_api(const PreparedApi& call, const UpstreamDirectory& directory,
                        std::chrono::milliseconds timeout, const CancellationToken& cancel) {
    if (cancel.cancelled()) return InvokeResult::failure(StepError::transport("cancelled"));

    auto it = directory.base_urls.find(call.base_url_key);
    if (it == directory.base_urls.end())
        return InvokeResult::failure(
            StepError::transport("unknown base_url_key '" + call.base_url_key + "'"));

    std::string host;
    int port = 80;
    if (!split_base_url(it->second, host, port))
        return InvokeResult::failure(StepError::transport("bad base URL '" + it->second + "'"));

    auto started = std::chrono::steady_clock::now();
    httplib::Client client(host, port);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_keep_alive(false);

    httplib::Result result;
    if (call.method == "GET") {
        result = client.Get(call.path);
    } else if (call.method == "POST") {
        result = client.Post(call.path, "", "application/json");
    } else if (call.method == "PUT") {
        result = client.Put(call.path, "", "application/json");
    } else if (call.method == "DELETE") {
        result = client.Delete(call.path);
    } else if (call.method == "HEAD") {
        result = client.Head(call.path);
    } else {
        return InvokeResult::failure(
            StepError::transport("unsupported method '" + call.method + "'"));
    }

    if (!result) {
        auto elapsed = std::chrono::steady_clock::now() - started;
        // httplib reports both resets and expired read timers as read errors;
        // elapsed time against the attempt budget tells them apart.
        if (result.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout)
            return InvokeResult::failure(StepError::timeout(
                "no response within " + std::to_string(timeout.count()) + " ms"));
        return InvokeResult::failure(
            StepError::transport(httplib::to_string(result.error())));
    }

    if (result->status >= 200 && result->status < 300)
        return InvokeResult::success(parse_body(result->body));
    return InvokeResult::failure(StepError::upstream(result->status, result->body));
}

InvokeResult invoke_transform(const PreparedTransform& call) {
    const TransformExpr& expr = call.expr;

    auto input = [&](const std::string& step) -> const Json* {
        if (!call.inputs.contains(step)) return nullptr;
        return &call.inputs.at(step);
    };

    if (expr.name == "pick") {
        if (expr.step_args.size() != 1)
            return InvokeResult::failure(StepError::transform("pick takes one input step"));
        const Json* source = input(expr.step_args[0]);
        if (!source)
            return InvokeResult::failure(
                StepError::transform("missing input '" + expr.step_args[0] + "'"));
        // Single-row warehouse results unwrap to the row itself.
        const Json* view = source;
        if (view->is_object() && view->contains("rows") && view->at("rows").is_array()) {
            const Json& rows = view->at("rows");
            if (rows.size() != 1)
                return InvokeResult::failure(StepError::transform(
                    "pick expects a single row, got " + std::to_string(rows.size())));
            view = &rows[0];
        }
        if (!view->is_object())
            return InvokeResult::failure(StepError::transform("pick input is not an object"));
        Json out = Json::object();
        for (const auto& field : expr.field_args) {
            if (!view->contains(field))
                return InvokeResult::failure(
                    StepError::transform("pick field '" + field + "' not present"));
            out[field] = view->at(field);
        }
        return InvokeResult::success(out);
    }

    if (expr.name == "merge_inputs") {
        Json out = Json::object();
        for (const auto& step : expr.step_args) {
            const Json* source = input(step);
            if (!source)
                return InvokeResult::failure(
                    StepError::transform("missing input '" + step + "'"));
            if (!source->is_object())
                return InvokeResult::failure(
                    StepError::transform("merge_inputs input '" + step + "' is not an object"));
            for (const auto& [key, value] : source->items()) out[key] = value;
        }
        return InvokeResult::success(out);
    }

    if (expr.name == "count") {
        if (expr.step_args.size() != 1)
            return InvokeResult::failure(StepError::transform("count takes one input step"));
        const Json* source = input(expr.step_args[0]);
        if (!source)
            return InvokeResult::failure(
                StepError::transform("missing input '" + expr.step_args[0] + "'"));
        size_t n = 0;
        if (source->is_object() && source->contains("rows") && source->at("rows").is_array())
            n = source->at("rows").size();
        else if (source->is_array())
            n = source->size();
        else if (source->is_object())
            n = source->size();
        else
            return InvokeResult::failure(StepError::transform("count input is not countable"));
        return InvokeResult::success(Json{{"count", n}});
    }

    return InvokeResult::failure(StepError::transform("unknown transform '" + expr.name + "'"));
}

InvokeResult DispatchInvoker::invoke(const StepCall& call,
                                     std::chrono::milliseconds attempt_timeout,
                                     const CancellationToken& cancel) {
    if (const auto* api = std::get_if<PreparedApi>(&call.invocation))
        return invoke_api(*api, directory_, attempt_timeout, cancel);
    if (const auto* wh = std::get_if<PreparedWarehouse>(&call.invocation)) {
        auto it = directory_.stores.find(wh->source_key);
        if (it == directory_.stores.end() || !it->second)
            return InvokeResult::failure(
                StepError::transport("unknown source_key '" + wh->source_key + "'"));
        return invoke_warehouse(*it->second, wh->query, wh->param_values, attempt_timeout,
                                cancel);
    }
    return invoke_transform(std::get<PreparedTransform>(call.invocation));
}

}  // namespace orchestron
