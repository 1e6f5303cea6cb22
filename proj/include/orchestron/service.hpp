#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "orchestron/engine.hpp"

namespace orchestron {

struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::filesystem::path spec_directory;
    std::filesystem::path fixtures_directory;   // warehouse CSVs, optional
    std::map<std::string, std::string> upstreams;
    EngineConfig engine;
    std::filesystem::path trace_sink;           // JSONL, optional

    static ServiceConfig parse(const std::string& document);
    static ServiceConfig load_file(const std::filesystem::path& path);
};

// HTTP front over the engine. Endpoints:
//   POST /v1/operations/{name}:execute   body {params: {...}, tenant?}
//   GET  /v1/operations/{name}/plan
//   POST /v1/admin/reload
//   GET  /v1/health
// Hot reload replaces the registry atomically; in-flight executions keep the
// snapshot they resolved.
class Service {
public:
    Service(ServiceConfig config, std::shared_ptr<Invoker> invoker_override = nullptr);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Loads specs, binds, serves on a background thread. Port 0 picks a free
    // port (readable via port()).
    bool start();
    void stop();

    int port() const { return port_; }
    const std::string& instance_id() const { return instance_id_; }
    SpecRegistry& registry() { return *registry_; }
    ReloadReport reload();

private:
    struct Impl;
    void write_trace(const ExecutionTrace& trace);

    ServiceConfig config_;
    std::shared_ptr<SpecRegistry> registry_;
    std::shared_ptr<Invoker> invoker_;
    std::unique_ptr<Engine> engine_;
    std::unique_ptr<Impl> impl_;
    std::thread serve_thread_;
    std::mutex trace_sink_mutex_;
    std::string instance_id_;
    int port_ = 0;
};

// Pure mapping from an execution result to the HTTP status for :execute.
int http_status_for(const ExecutionResult& result);

}  // namespace orchestron
