// Dialogue engine service: HTTP API plus WebSocket push channel.

#include <csignal>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "rlsdp/config.hpp"
#include "rlsdp/server.hpp"

namespace {

rlsdp::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) std::thread([] { g_service->stop(); }).detach();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue cycle engine"};
  std::string config_path;
  std::string replay_path;
  std::vector<std::string> sets;
  rlsdp::KeyValues flags;
  app.add_option("--config", config_path, "key-value config file")->check(CLI::ExistingFile);
  app.add_option("--replay", replay_path, "event log to replay before serving")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "any config key as key=value");
  for (const char* key : {"method", "tau", "agree_ratio", "port", "ws_port", "seed",
                          "auto_close_seconds", "event_log", "allow_self_votes", "bias_prior_std"}) {
    app.add_option_function<std::string>(std::string("--") + key,
                                         [&flags, key](const std::string& v) { flags[key] = v; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    rlsdp::EngineSettings settings;
    if (!config_path.empty()) rlsdp::apply_key_values(settings, rlsdp::load_key_values(config_path));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw rlsdp::Error(rlsdp::Errc::invalid_argument, "--set expects key=value");
      flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    rlsdp::apply_key_values(settings, flags);

    std::unique_ptr<rlsdp::Engine> engine;
    if (!replay_path.empty()) {
      engine = rlsdp::Engine::replay(rlsdp::Engine::read_log_file(replay_path), settings);
    }
    rlsdp::Service service(settings, std::move(engine));
    const int port = service.start();
    std::cerr << "http on " << port << ", websocket on " << service.ws_port() << '\n';
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.wait();
    g_service = nullptr;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
