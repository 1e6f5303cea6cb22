// orchestron-mock: scripted HTTP upstream for latency and fault experiments.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"

#include "orchestron/sim_harness.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
    CLI::App app{"orchestron-mock: scripted upstream server"};
    std::string script_file;
    std::string listen = ":9090";
    app.add_option("--script", script_file, "script file (route -> latency/body/faults)")
        ->required();
    app.add_option("--listen", listen, "listen address, host:port or :port");
    CLI11_PARSE(app, argc, argv);

    try {
        orchestron::SimScript script = orchestron::SimScript::load_file(script_file);

        std::string host = "0.0.0.0";
        int port = 9090;
        auto colon = listen.find_last_of(':');
        if (colon == std::string::npos) {
            host = listen;
        } else {
            if (colon > 0) host = listen.substr(0, colon);
            port = std::stoi(listen.substr(colon + 1));
        }

        orchestron::MockUpstreamServer server(std::move(script));
        if (!server.start(host, port)) {
            std::cerr << "failed to bind " << host << ":" << port << "\n";
            return 1;
        }
        std::cout << "orchestron-mock serving on " << host << ":" << server.port() << "\n";

        std::signal(SIGINT, [](int) { g_stop = 1; });
        std::signal(SIGTERM, [](int) { g_stop = 1; });
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
