#include "orchestron/sim_harness.hpp"

#include <condition_variable>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "orchestron/connectors.hpp"
#include "orchestron/spec_model.hpp"

namespace orchestron {

std::optional<FaultSpec> FaultSpec::parse(const std::string& text) {
    if (text == "ok") return FaultSpec{Kind::ok, 0};
    if (text == "drop") return FaultSpec{Kind::drop, 0};
    if (text == "hang") return FaultSpec{Kind::hang, 0};
    if (text.rfind("status:", 0) == 0) {
        try {
            return FaultSpec{Kind::status, std::stoi(text.substr(7))};
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::string FaultSpec::to_string() const {
    switch (kind) {
        case Kind::ok: return "ok";
        case Kind::drop: return "drop";
        case Kind::hang: return "hang";
        case Kind::status: return "status:" + std::to_string(status_code);
    }
    return "ok";
}

void SimScript::add_route(RouteScript route) {
    if (route.latency_ms.empty()) route.latency_ms = {0};
    if (route.faults.empty()) route.faults = {FaultSpec{}};
    routes_[route.route] = std::move(route);
}

SimScript SimScript::parse(const std::string& document) {
    Json tree = parse_structured_text(document);
    if (!tree.is_object()) throw ParseError("bad_document", "script must be a mapping");
    SimScript script;
    for (const auto& [name, entry] : tree.items()) {
        RouteScript route;
        route.route = name;
        if (!entry.is_object())
            throw ParseError("bad_field", "script route '" + name + "' must be a mapping");
        if (entry.contains("path")) route.path_prefix = entry.at("path").get<std::string>();
        if (entry.contains("body")) route.body = entry.at("body");
        if (entry.contains("latency_ms")) {
            const Json& lat = entry.at("latency_ms");
            route.latency_ms.clear();
            if (lat.is_number_integer()) {
                route.latency_ms.push_back(lat.get<int>());
            } else if (lat.is_array()) {
                for (const auto& v : lat) route.latency_ms.push_back(v.get<int>());
            } else {
                throw ParseError("bad_field",
                                 "latency_ms in route '" + name + "' must be int or list");
            }
        }
        if (entry.contains("faults")) {
            route.faults.clear();
            for (const auto& f : entry.at("faults")) {
                auto fault = FaultSpec::parse(f.get<std::string>());
                if (!fault)
                    throw ParseError("bad_field", "unknown fault '" + f.get<std::string>() +
                                                      "' in route '" + name + "'");
                route.faults.push_back(*fault);
            }
        }
        script.add_route(std::move(route));
    }
    return script;
}

SimScript SimScript::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("io_error", "cannot read script file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const RouteScript* SimScript::find_route(const std::string& route) const {
    auto it = routes_.find(route);
    return it == routes_.end() ? nullptr : &it->second;
}

const RouteScript* SimScript::match_path(const std::string& path) const {
    const RouteScript* best = nullptr;
    size_t best_len = 0;
    for (const auto& [name, route] : routes_) {
        if (route.path_prefix.empty()) continue;
        if (path.rfind(route.path_prefix, 0) == 0 && route.path_prefix.size() >= best_len) {
            best = &route;
            best_len = route.path_prefix.size();
        }
    }
    return best;
}

std::pair<int, FaultSpec> SimScript::next_call(const std::string& route) const {
    const RouteScript* rs = find_route(route);
    if (!rs) return {0, FaultSpec{FaultSpec::Kind::drop, 0}};
    int index;
    {
        std::lock_guard lock(counters_->mutex);
        index = counters_->calls[route]++;
    }
    auto at = [index](const auto& seq) {
        size_t i = std::min(static_cast<size_t>(index), seq.size() - 1);
        return seq[i];
    };
    return {at(rs->latency_ms), at(rs->faults)};
}

int SimScript::calls_made(const std::string& route) const {
    std::lock_guard lock(counters_->mutex);
    auto it = counters_->calls.find(route);
    return it == counters_->calls.end() ? 0 : it->second;
}

std::vector<std::string> SimScript::route_names() const {
    std::vector<std::string> names;
    for (const auto& [name, route] : routes_) names.push_back(name);
    return names;
}

// ---------------------------------------------------------------------------
// In-process simulated invoker
// ---------------------------------------------------------------------------

InvokeResult SimulatedInvoker::invoke(const StepCall& call,
                                      std::chrono::milliseconds attempt_timeout,
                                      const CancellationToken& cancel) {
    const RouteScript* route = script_.find_route(call.step_name);
    if (!route && std::holds_alternative<PreparedApi>(call.invocation))
        route = script_.match_path(std::get<PreparedApi>(call.invocation).path);
    if (!route) {
        // Transforms are pure; they run for real even under simulation.
        if (std::holds_alternative<PreparedTransform>(call.invocation))
            return invoke_transform(std::get<PreparedTransform>(call.invocation));
        return InvokeResult::failure(StepError::transport("unscripted route"));
    }

    auto [latency, fault] = script_.next_call(route->route);
    auto latency_ms = std::chrono::milliseconds(latency);

    if (fault.kind == FaultSpec::Kind::hang || latency_ms >= attempt_timeout) {
        if (cancel.wait_for(attempt_timeout))
            return InvokeResult::failure(StepError::transport("cancelled"));
        return InvokeResult::failure(StepError::timeout(
            "no response within " + std::to_string(attempt_timeout.count()) + " ms"));
    }
    if (latency > 0 && cancel.wait_for(latency_ms))
        return InvokeResult::failure(StepError::transport("cancelled"));

    switch (fault.kind) {
        case FaultSpec::Kind::ok:
            return InvokeResult::success(route->body);
        case FaultSpec::Kind::status:
            if (fault.status_code >= 200 && fault.status_code < 300)
                return InvokeResult::success(route->body);
            return InvokeResult::failure(StepError::upstream(
                fault.status_code,
                Json{{"error", "scripted fault"}, {"status", fault.status_code}}.dump()));
        case FaultSpec::Kind::drop:
            return InvokeResult::failure(StepError::transport("connection dropped"));
        case FaultSpec::Kind::hang:
            break;  // handled above
    }
    return InvokeResult::failure(StepError::transport("unreachable"));
}

// ---------------------------------------------------------------------------
// Mock upstream HTTP server
// ---------------------------------------------------------------------------

struct MockUpstreamServer::Impl {
    httplib::Server server;
    std::mutex mutex;
    std::condition_variable cv;
    bool stopping = false;

    // Interruptible sleep; true when the server is shutting down.
    bool wait(std::chrono::milliseconds duration) {
        std::unique_lock lock(mutex);
        return cv.wait_for(lock, duration, [this] { return stopping; });
    }
    void wait_until_stopped() {
        std::unique_lock lock(mutex);
        cv.wait(lock, [this] { return stopping; });
    }
};

MockUpstreamServer::MockUpstreamServer(SimScript script)
    : script_(std::move(script)), impl_(std::make_unique<Impl>()) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        const RouteScript* route = script_.match_path(req.path);
        if (!route) route = script_.find_route(req.path);
        if (!route) {
            res.status = 404;
            res.set_content(Json{{"error", "unscripted route"}}.dump(), "application/json");
            return;
        }
        auto [latency, fault] = script_.next_call(route->route);
        if (latency > 0 && impl_->wait(std::chrono::milliseconds(latency))) {
            res.status = 503;
            return;
        }
        switch (fault.kind) {
            case FaultSpec::Kind::ok:
                res.status = 200;
                res.set_content(route->body.dump(), "application/json");
                break;
            case FaultSpec::Kind::status:
                res.status = fault.status_code;
                res.set_content(
                    Json{{"error", "scripted fault"}, {"status", fault.status_code}}.dump(),
                    "application/json");
                break;
            case FaultSpec::Kind::drop:
                // Promise a body, then abort mid-stream: the client observes
                // a reset rather than a clean response.
                res.set_content_provider(
                    64, "application/json",
                    [](size_t, httplib::DataSink&) { return false; });
                break;
            case FaultSpec::Kind::hang:
                impl_->wait_until_stopped();
                res.status = 503;
                break;
        }
    };
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
    impl_->server.Put(".*", handler);
    impl_->server.Delete(".*", handler);
}

MockUpstreamServer::~MockUpstreamServer() { stop(); }

bool MockUpstreamServer::start(const std::string& host, int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
        if (port_ < 0) return false;
    } else {
        if (!impl_->server.bind_to_port(host, port)) return false;
        port_ = port;
    }
    serve_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

void MockUpstreamServer::stop() {
    if (!impl_) return;
    {
        std::lock_guard lock(impl_->mutex);
        impl_->stopping = true;
    }
    impl_->cv.notify_all();
    impl_->server.stop();
    if (serve_thread_.joinable()) serve_thread_.join();
}

// ---------------------------------------------------------------------------
// Canonical fixture
// ---------------------------------------------------------------------------

Customer360Fixture customer360_fixture() {
    Customer360Fixture fixture;
    fixture.spec_yaml = R"(operation: customer360
steps:
  - name: accountService
    type: api
    method: GET
    endpoint: /accounts/{customer_id}
    timeout_ms: 500

  - name: transactionService
    type: api
    method: GET
    endpoint: /transactions/{customer_id}
    timeout_ms: 800

  - name: fraudSignals
    type: api
    method: GET
    endpoint: /fraud/signals/{customer_id}
    timeout_ms: 400
    role: optional

  - name: riskProfile
    type: warehouse
    query: SELECT score, segment FROM risk_profiles WHERE customer_id = ?
    timeout_ms: 1200
    role: optional

aggregation:
  strategy: merge
  required_steps: [accountService, transactionService]
)";

    fixture.five_step_spec_yaml = R"(operation: customer360
steps:
  - name: accountService
    type: api
    method: GET
    endpoint: /accounts/{customer_id}
    timeout_ms: 500

  - name: transactionService
    type: api
    method: GET
    endpoint: /transactions/{customer_id}
    timeout_ms: 800

  - name: fraudSignals
    type: api
    method: GET
    endpoint: /fraud/signals/{customer_id}
    timeout_ms: 400
    role: optional

  - name: riskProfile
    type: warehouse
    query: SELECT score, segment FROM risk_profiles WHERE customer_id = ?
    timeout_ms: 1200
    role: optional

  - name: recentCases
    type: api
    method: GET
    endpoint: /cases/recent/{customer_id}
    timeout_ms: 600
    role: optional
    depends_on: [accountService]

aggregation:
  strategy: merge
  required_steps: [accountService, transactionService]
)";

    fixture.fallback_spec_yaml = R"(operation: customer360
steps:
  - name: accountService
    type: api
    method: GET
    endpoint: /accounts/{customer_id}
    timeout_ms: 500

  - name: transactionService
    type: api
    method: GET
    endpoint: /transactions/{customer_id}
    timeout_ms: 800

  - name: fraudSignals
    type: api
    method: GET
    endpoint: /fraud/signals/{customer_id}
    timeout_ms: 400
    role: optional

  - name: riskProfile
    type: warehouse
    query: SELECT score, segment FROM risk_profiles WHERE customer_id = ?
    timeout_ms: 1200
    role: optional

  - name: riskProfileCache
    type: api
    method: GET
    endpoint: /cache/risk/{customer_id}
    timeout_ms: 300
    role: fallback
    fallback_for: riskProfile

aggregation:
  strategy: merge
  required_steps: [accountService, transactionService]
)";

    fixture.script_yaml = R"(accountService:
  path: /accounts/
  latency_ms: 300
  body: {status: open, owner: "C123", opened: "2019-04-02"}
transactionService:
  path: /transactions/
  latency_ms: 600
  body: {transactions: [{id: t1, amount: 120.5}, {id: t2, amount: -40.0}], page: 1}
fraudSignals:
  path: /fraud/signals/
  latency_ms: 200
  body: {signals: [], risk_flags: 0}
riskProfile:
  latency_ms: 900
  body: {rows: [{score: 0.82, segment: standard}], row_count: 1}
recentCases:
  path: /cases/recent/
  latency_ms: 150
  body: {cases: [{id: case-9, status: closed}]}
riskProfileCache:
  path: /cache/risk/
  latency_ms: 100
  body: {rows: [{score: 0.79, segment: standard}], row_count: 1, cached: true}
)";

    fixture.risk_profiles_csv =
        "customer_id,score,segment\n"
        "C123,0.82,standard\n"
        "C124,0.35,premium\n"
        "C200,0.91,watch\n";
    return fixture;
}

}  // namespace orchestron
