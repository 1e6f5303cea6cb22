// orchestron: validate specs, inspect plans, run operations, serve HTTP.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "orchestron/connectors.hpp"
#include "orchestron/engine.hpp"
#include "orchestron/service.hpp"
#include "orchestron/sim_harness.hpp"

namespace {

using namespace orchestron;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_validate(const std::string& file) {
    try {
        OperationSpec spec = parse_spec(read_file(file));
        ValidationReport report = validate_spec(spec);
        std::cout << report.to_json().dump(2) << "\n";
        return report.valid ? 0 : 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error";
        if (e.line() >= 0) std::cerr << " at line " << e.line();
        std::cerr << ": " << e.what() << "\n";
        return 1;
    }
}

int cmd_plan(const std::string& file, const std::string& op) {
    try {
        OperationSpec spec = parse_spec(read_file(file));
        if (!op.empty() && spec.operation_name != op) {
            std::cerr << "file defines operation '" << spec.operation_name << "', not '" << op
                      << "'\n";
            return 1;
        }
        ValidationReport report = validate_spec(spec);
        if (!report.valid) {
            std::cerr << report.to_json().dump(2) << "\n";
            return 1;
        }
        std::cout << plan_summary(spec).to_json().dump(2) << "\n";
        return 0;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    }
}

// Script covering every step with zero latency when --simulate runs without
// an explicit script file.
SimScript default_script(const OperationSpec& spec) {
    SimScript script;
    for (const auto& step : spec.steps) {
        RouteScript route;
        route.route = step.name;
        route.body = Json{{"simulated", true}, {"step", step.name}};
        script.add_route(std::move(route));
    }
    return script;
}

int cmd_run(const std::string& file, const std::string& op,
            const std::vector<std::string>& params, bool simulate,
            const std::string& script_file, const std::string& fixtures_dir,
            const std::vector<std::string>& upstreams, const std::string& mode,
            int max_concurrency, int deadline_ms) {
    try {
        OperationSpec spec = parse_spec(read_file(file));
        if (!op.empty() && spec.operation_name != op) {
            std::cerr << "file defines operation '" << spec.operation_name << "', not '" << op
                      << "'\n";
            return 1;
        }

        auto registry = std::make_shared<SpecRegistry>();
        ValidationReport report = registry->insert(spec);
        if (!report.valid) {
            std::cerr << report.to_json().dump(2) << "\n";
            return 1;
        }

        std::shared_ptr<Invoker> invoker;
        if (simulate) {
            SimScript script =
                script_file.empty() ? default_script(spec) : SimScript::load_file(script_file);
            invoker = std::make_shared<SimulatedInvoker>(std::move(script));
        } else {
            UpstreamDirectory directory;
            for (const auto& entry : upstreams) {
                auto eq = entry.find('=');
                if (eq == std::string::npos) {
                    std::cerr << "bad --upstream '" << entry << "', expected key=url\n";
                    return 1;
                }
                directory.base_urls[entry.substr(0, eq)] = entry.substr(eq + 1);
            }
            if (!fixtures_dir.empty())
                directory.stores["default"] = std::make_shared<WarehouseStore>(
                    WarehouseStore::load_directory(fixtures_dir));
            invoker = std::make_shared<DispatchInvoker>(std::move(directory));
        }

        EngineConfig config;
        config.max_concurrency = max_concurrency;
        config.operation_deadline_ms = deadline_ms;
        if (auto parsed = scheduling_mode_from_string(mode)) config.scheduling_mode = *parsed;

        RequestContext request;
        request.operation_name = spec.operation_name;
        request.request_id = generate_request_id();
        for (const auto& entry : params) {
            auto eq = entry.find('=');
            if (eq == std::string::npos) {
                std::cerr << "bad --param '" << entry << "', expected k=v\n";
                return 1;
            }
            request.params[entry.substr(0, eq)] = entry.substr(eq + 1);
        }

        Engine engine(registry, invoker, config);
        ExecutionResult result = engine.execute_operation(request, spec.operation_name);
        Json out = result.response.to_json();
        if (result.error)
            out["error"] = Json{{"kind", to_string(result.error->kind)},
                                {"step", result.error->step},
                                {"message", result.error->message}};
        std::cout << out.dump(2) << "\n";

        if (result.response.status == ResponseStatus::complete) return 0;
        if (result.response.status == ResponseStatus::partial) return 3;
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

volatile std::sig_atomic_t g_reload_requested = 0;
volatile std::sig_atomic_t g_stop_requested = 0;

int cmd_serve(const std::string& config_file) {
    try {
        ServiceConfig config = ServiceConfig::load_file(config_file);
        Service service(std::move(config));
        if (!service.start()) {
            std::cerr << "failed to bind listen address\n";
            return 1;
        }
        std::cout << "orchestron serving on port " << service.port() << " (instance "
                  << service.instance_id() << ")\n";
        std::cout << "SIGHUP or POST /v1/admin/reload reloads the spec directory\n";

        std::signal(SIGHUP, [](int) { g_reload_requested = 1; });
        std::signal(SIGINT, [](int) { g_stop_requested = 1; });
        std::signal(SIGTERM, [](int) { g_stop_requested = 1; });
        while (!g_stop_requested) {
            if (g_reload_requested) {
                g_reload_requested = 0;
                ReloadReport report = service.reload();
                std::cout << report.to_json().dump() << "\n";
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        service.stop();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"orchestron: configuration-driven request-time orchestration"};
    app.require_subcommand(1);

    std::string file, op, script_file, fixtures_dir, config_file;
    std::string mode = "completion_driven";
    std::vector<std::string> params, upstreams;
    bool simulate = false;
    int max_concurrency = 8;
    int deadline_ms = 5000;

    auto* validate = app.add_subcommand("validate", "Parse and validate a spec file");
    validate->add_option("file", file, "spec file (YAML or JSON)")->required();

    auto* plan = app.add_subcommand("plan", "Print the static execution plan");
    plan->add_option("file", file, "spec file")->required();
    plan->add_option("--op", op, "operation name (must match the file)");

    auto* run = app.add_subcommand("run", "Execute one operation");
    run->add_option("file", file, "spec file")->required();
    run->add_option("--op", op, "operation name (must match the file)");
    run->add_option("--param", params, "request parameter k=v (repeatable)");
    run->add_flag("--simulate", simulate, "use the in-process simulated invoker");
    run->add_option("--script", script_file, "simulation script (with --simulate)");
    run->add_option("--fixtures", fixtures_dir, "warehouse CSV directory");
    run->add_option("--upstream", upstreams, "upstream base URL key=url (repeatable)");
    run->add_option("--mode", mode, "batch_wave or completion_driven");
    run->add_option("--max-concurrency", max_concurrency, "concurrent step limit");
    run->add_option("--deadline-ms", deadline_ms, "whole-operation budget");

    auto* serve = app.add_subcommand("serve", "Run the HTTP service front");
    serve->add_option("--config", config_file, "service config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (validate->parsed()) return cmd_validate(file);
    if (plan->parsed()) return cmd_plan(file, op);
    if (run->parsed())
        return cmd_run(file, op, params, simulate, script_file, fixtures_dir, upstreams, mode,
                       max_concurrency, deadline_ms);
    if (serve->parsed()) return cmd_serve(config_file);
    return 1;
}
