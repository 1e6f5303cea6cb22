#include "orchestron/service.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"

#include "orchestron/connectors.hpp"

#ifdef __unix__
#include <unistd.h>
#endif

namespace orchestron {

ServiceConfig ServiceConfig::parse(const std::string& document) {
    Json tree = parse_structured_text(document);
    ServiceConfig config;
    if (tree.contains("listen")) {
        std::string listen = tree.at("listen").get<std::string>();
        auto colon = listen.find_last_of(':');
        if (colon == std::string::npos) {
            config.listen_host = listen;
        } else {
            std::string host = listen.substr(0, colon);
            config.listen_host = host.empty() ? "0.0.0.0" : host;
            config.listen_port = std::stoi(listen.substr(colon + 1));
        }
    }
    if (tree.contains("spec_directory"))
        config.spec_directory = tree.at("spec_directory").get<std::string>();
    if (tree.contains("fixtures_directory"))
        config.fixtures_directory = tree.at("fixtures_directory").get<std::string>();
    if (tree.contains("upstreams"))
        for (const auto& [key, url] : tree.at("upstreams").items())
            config.upstreams[key] = url.get<std::string>();
    if (tree.contains("engine")) {
        const Json& eng = tree.at("engine");
        if (eng.contains("max_concurrency"))
            config.engine.max_concurrency = eng.at("max_concurrency").get<int>();
        if (eng.contains("operation_deadline_ms"))
            config.engine.operation_deadline_ms = eng.at("operation_deadline_ms").get<int>();
        if (eng.contains("scheduling_mode")) {
            auto mode = scheduling_mode_from_string(eng.at("scheduling_mode").get<std::string>());
            if (!mode)
                throw ParseError("bad_field", "unknown scheduling_mode '" +
                                                  eng.at("scheduling_mode").get<std::string>() +
                                                  "'");
            config.engine.scheduling_mode = *mode;
        }
    }
    if (tree.contains("trace_sink"))
        config.trace_sink = tree.at("trace_sink").get<std::string>();
    return config;
}

ServiceConfig ServiceConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("io_error", "cannot read config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

int http_status_for(const ExecutionResult& result) {
    if (!result.error) return 200;  // complete and partial both succeed
    switch (result.error->kind) {
        case OperationError::Kind::not_found: return 404;
        case OperationError::Kind::bind_failed: return 400;
        case OperationError::Kind::required_step_failed: return 502;
        case OperationError::Kind::deadline_exceeded: return 504;
    }
    return 500;
}

struct Service::Impl {
    httplib::Server server;
};

Service::Service(ServiceConfig config, std::shared_ptr<Invoker> invoker_override)
    : config_(std::move(config)), registry_(std::make_shared<SpecRegistry>()),
      impl_(std::make_unique<Impl>()) {
    instance_id_ = generate_request_id();

    if (invoker_override) {
        invoker_ = std::move(invoker_override);
    } else {
        UpstreamDirectory directory;
        directory.base_urls = config_.upstreams;
        if (!config_.fixtures_directory.empty()) {
            auto store = std::make_shared<WarehouseStore>(
                WarehouseStore::load_directory(config_.fixtures_directory));
            directory.stores["default"] = store;
        }
        invoker_ = std::make_shared<DispatchInvoker>(std::move(directory));
    }
    engine_ = std::make_unique<Engine>(registry_, invoker_, config_.engine);

    auto& server = impl_->server;

    server.Post(R"(/v1/operations/([^/:]+):execute)",
                [this](const httplib::Request& req, httplib::Response& res) {
        std::string name = req.matches[1];
        Json body = Json::object();
        if (!req.body.empty()) {
            try {
                body = Json::parse(req.body);
            } catch (const Json::parse_error& e) {
                res.status = 400;
                res.set_content(Json{{"error", "malformed body"}, {"detail", e.what()}}.dump(),
                                "application/json");
                return;
            }
        }

        RequestContext request;
        request.operation_name = name;
        request.request_id = generate_request_id();
        if (body.contains("params") && body.at("params").is_object())
            request.params = body.at("params");
        request.resolution.operation_name = name;
        if (body.contains("tenant") && body.at("tenant").is_string())
            request.resolution.tenant = body.at("tenant").get<std::string>();
        if (req.has_header("X-Tenant"))  // header wins over the body field
            request.resolution.tenant = req.get_header_value("X-Tenant");

        ExecutionResult result = engine_->execute_operation(request, name);
        write_trace(result.trace);

        res.status = http_status_for(result);
        Json payload = result.response.to_json();
        if (result.error) {
            payload["error"] = Json{{"kind", to_string(result.error->kind)},
                                    {"step", result.error->step},
                                    {"message", result.error->message}};
        }
        res.set_content(payload.dump(), "application/json");
    });

    server.Get(R"(/v1/operations/([^/:]+)/plan)",
               [this](const httplib::Request& req, httplib::Response& res) {
        std::string name = req.matches[1];
        ResolutionContext context;
        context.operation_name = name;
        if (req.has_header("X-Tenant")) context.tenant = req.get_header_value("X-Tenant");
        auto spec = resolve_configuration(name, context, *registry_);
        if (!spec) {
            res.status = 404;
            res.set_content(Json{{"error", "unknown operation"}}.dump(), "application/json");
            return;
        }
        res.set_content(plan_summary(*spec).to_json().dump(), "application/json");
    });

    server.Post("/v1/admin/reload", [this](const httplib::Request&, httplib::Response& res) {
        ReloadReport report = reload();
        res.set_content(report.to_json().dump(), "application/json");
    });

    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        Json health{{"status", "ok"},
                    {"instance_id", instance_id_},
                    {"registry_generation", registry_->generation()}};
#ifdef __unix__
        health["pid"] = getpid();
#endif
        res.set_content(health.dump(), "application/json");
    });
}

Service::~Service() { stop(); }

void Service::write_trace(const ExecutionTrace& trace) {
    if (config_.trace_sink.empty()) return;
    std::lock_guard lock(trace_sink_mutex_);
    std::ofstream out(config_.trace_sink, std::ios::app);
    out << trace.to_jsonl();
}

ReloadReport Service::reload() { return registry_->load_directory(config_.spec_directory); }

bool Service::start() {
    if (!config_.spec_directory.empty()) reload();
    auto& server = impl_->server;
    if (config_.listen_port == 0) {
        port_ = server.bind_to_any_port(config_.listen_host);
        if (port_ < 0) return false;
    } else {
        if (!server.bind_to_port(config_.listen_host, config_.listen_port)) return false;
        port_ = config_.listen_port;
    }
    serve_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (serve_thread_.joinable()) serve_thread_.join();
}

}  // namespace orchestron
