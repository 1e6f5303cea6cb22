#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "orchestron/invoker.hpp"

namespace orchestron {

// Scripted behavior for one simulated route: fixed or per-call latency, a
// response body, and a fault sequence consumed in call order (exhausted
// sequences repeat their last entry).
struct FaultSpec {
    enum class Kind { ok, status, drop, hang };
    Kind kind = Kind::ok;
    int status_code = 0;    // status faults only

    static std::optional<FaultSpec> parse(const std::string& text);
    std::string to_string() const;
};

struct RouteScript {
    std::string route;                  // step name
    std::string path_prefix;            // HTTP route match, optional
    Json body = Json::object();
    std::vector<int> latency_ms = {0};  // per-call, last repeats
    std::vector<FaultSpec> faults = {FaultSpec{}};
};

// Immutable after construction except the per-route call counters.
class SimScript {
public:
    SimScript() : counters_(std::make_shared<Counters>()) {}

    void add_route(RouteScript route);

    // Parses {route: {latency_ms, body, faults, path}} from YAML or JSON.
    static SimScript parse(const std::string& document);
    static SimScript load_file(const std::string& path);

    const RouteScript* find_route(const std::string& route) const;
    const RouteScript* match_path(const std::string& path) const;  // longest prefix

    // Consumes one scripted call: returns (latency, fault) for the route's
    // next call index. Thread-safe.
    std::pair<int, FaultSpec> next_call(const std::string& route) const;

    int calls_made(const std::string& route) const;
    std::vector<std::string> route_names() const;

private:
    struct Counters {
        std::mutex mutex;
        std::map<std::string, int> calls;
    };
    std::map<std::string, RouteScript> routes_;
    std::shared_ptr<Counters> counters_;
};

// In-process invoker driven by a script: sleeps the scripted latency on the
// real clock, then applies the next fault entry. Serves every target variant
// by step name. Unscripted routes fail with a transport error.
class SimulatedInvoker : public Invoker {
public:
    explicit SimulatedInvoker(SimScript script) : script_(std::move(script)) {}

    InvokeResult invoke(const StepCall& call, std::chrono::milliseconds attempt_timeout,
                        const CancellationToken& cancel) override;

    const SimScript& script() const { return script_; }

private:
    SimScript script_;
};

// Real-HTTP twin of the simulated invoker: serves the scripted routes over
// HTTP/1.1 with identical fault semantics. drop aborts the connection
// mid-response; hang never answers until shutdown.
class MockUpstreamServer {
public:
    explicit MockUpstreamServer(SimScript script);
    ~MockUpstreamServer();

    MockUpstreamServer(const MockUpstreamServer&) = delete;
    MockUpstreamServer& operator=(const MockUpstreamServer&) = delete;

    // Binds and serves on a background thread. Port 0 picks a free port.
    bool start(const std::string& host, int port);
    void stop();

    int port() const { return port_; }
    const SimScript& script() const { return script_; }

private:
    struct Impl;
    SimScript script_;
    std::unique_ptr<Impl> impl_;
    std::thread serve_thread_;
    int port_ = 0;
};

// Canonical end-to-end fixture: the customer360 spec, a script with
// latencies below each step's timeout, a risk_profiles CSV, and the
// five-step variant whose extra optional step depends on accountService.
struct Customer360Fixture {
    std::string spec_yaml;
    std::string five_step_spec_yaml;
    std::string fallback_spec_yaml;     // riskProfile with a registered fallback
    std::string script_yaml;
    std::string risk_profiles_csv;
};

Customer360Fixture customer360_fixture();

}  // namespace orchestron
