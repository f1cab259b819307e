// Command-line front end: serve, ingest, index stats, bench run/report, chat.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "jarvis/jarvis.hpp"

namespace {

jarvis::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int print(const jarvis::HttpResult& r) {
  std::cout << r.body.dump(2) << "\n";
  return r.status >= 200 && r.status < 300 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jarvis: on-device assistant service"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-C,--service-config", config_path, "service configuration JSON (env overrides apply)");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::optional<int> port;
  std::optional<std::string> host;
  serve->add_option("--port", port, "listen port (0 picks a free one)");
  serve->add_option("--host", host, "listen address");

  auto* ingest = app.add_subcommand("ingest", "ingest a corpus directory or JSON-lines file");
  std::string corpus;
  ingest->add_option("path", corpus, "<doc_id>/<page_no>.txt tree or .jsonl file")->required();

  auto* index = app.add_subcommand("index", "inspect the vector index");
  index->require_subcommand(1);
  index->add_subcommand("stats", "per-collection vector counts");

  auto* bench = app.add_subcommand("bench", "latency and hallucination benchmark");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "run a suite and write samples.csv/summary.json");
  std::string suite_path;
  std::string out_dir;
  bench_run->add_option("--config", suite_path, "suite JSON")->required()->check(CLI::ExistingFile);
  bench_run->add_option("--out", out_dir, "output directory");
  auto* bench_report = bench->add_subcommand("report", "print the summary of a finished run");
  std::string report_dir;
  bench_report->add_option("dir", report_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* chat = app.add_subcommand("chat", "interactive session on stdin");
  std::string session = "cli";
  std::string pipeline = "auto";
  chat->add_option("--session", session, "session id");
  chat->add_option("--pipeline", pipeline, "auto|standard|rag|hyde");

  CLI11_PARSE(app, argc, argv);

  try {
    // bench report only reads files and needs no service.
    if (bench_report->parsed()) {
      std::cout << jarvis::load_report(report_dir).dump(2) << "\n";
      return 0;
    }

    auto config = jarvis::load_config(config_path.empty() ? std::nullopt
                                                          : std::optional<std::filesystem::path>(config_path));
    if (port) config.port = *port;
    if (host) config.host = *host;
    jarvis::Service service(config);

    if (serve->parsed()) {
      jarvis::HttpServer server(service);
      const int bound = server.bind(config.host, config.port);
      if (bound < 0) {
        std::cerr << "cannot bind " << config.host << ":" << config.port << "\n";
        return 1;
      }
      std::cerr << "listening on http://" << config.host << ":" << bound << "\n";
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
      return 0;
    }

    if (ingest->parsed()) return print(service.ingest(jarvis::load_corpus(corpus)));

    if (index->parsed()) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& s : service.index().stats()) out.push_back({{"collection", s.name}, {"dim", s.dim}, {"count", s.count}});
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (bench_run->parsed()) {
      std::ifstream in(suite_path);
      const auto suite = nlohmann::json::parse(in);
      return print(service.bench_run(suite, std::filesystem::path(suite_path).parent_path(),
                                     out_dir.empty() ? std::nullopt
                                                     : std::optional<std::filesystem::path>(out_dir)));
    }

    if (chat->parsed()) {
      std::string line;
      std::cout << "> " << std::flush;
      while (std::getline(std::cin, line)) {
        if (line == "/quit" || line == "/exit") break;
        if (!jarvis::text::trim(line).empty()) {
          auto r = service.chat({{"session_id", session}, {"message", line}, {"pipeline", pipeline}});
          if (r.status == 200) {
            std::cout << r.body["answer"].get<std::string>() << "\n"
                      << "  [" << r.body["mode"].get<std::string>() << " / " << r.body["pipeline"].get<std::string>()
                      << ", " << r.body["llm_calls"] << " call(s), " << r.body["retrieved"].size() << " retrieved]\n";
          } else {
            std::cout << "error " << r.status << ": " << r.body["error"].get<std::string>() << "\n";
          }
        }
        std::cout << "> " << std::flush;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
