// Command-line harness: replay edit scripts, benchmark, serve editor clients.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "CLI11.hpp"

#include "pide/replay.hpp"
#include "pide/script.hpp"
#include "pide/service.hpp"
#include "pide/session.hpp"

namespace {

std::string default_checker_path() {
  if (const char *env = std::getenv("PIDE_CHECKER"); env && *env)
    return env;
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec)
    return (self.parent_path() / "pide-checker").string();
  return "pide-checker";
}

std::optional<unsigned> env_workers() {
  const char *env = std::getenv("PIDE_WORKERS");
  if (!env || !*env)
    return std::nullopt;
  auto v = pide::protocol::parse_u64(env);
  if (!v || *v == 0 || *v > 1024) {
    std::cerr << "pide: ignoring invalid PIDE_WORKERS=" << env << '\n';
    return std::nullopt;
  }
  return static_cast<unsigned>(*v);
}

bool load_script(const std::string &path, std::vector<pide::script::Line> &lines) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "pide: cannot read " << path << '\n';
    return false;
  }
  try {
    lines = pide::script::parse(in);
  } catch (const pide::script::ScriptError &ex) {
    std::cerr << path << ": " << ex.what() << '\n';
    return false;
  }
  return true;
}

void print_diagnostics(const pide::Session &session) {
  for (const auto &line : session.diagnostics())
    std::cerr << "pide: " << line << '\n';
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"prover IDE session harness"};
  app.require_subcommand(1);

  std::string script_path;
  std::string out_path;
  std::string dump = "xml";
  std::string listen = "127.0.0.1:8765";
  std::optional<unsigned> workers;
  std::optional<std::size_t> margin;
  bool stable = false;
  bool in_process = false;

  auto *replay = app.add_subcommand("replay", "replay an edit script and dump snapshots");
  replay->add_option("script", script_path, "edit script")->required();
  replay->add_flag("--stable", stable, "omit serials and ids from dumps");
  replay->add_option("--workers", workers, "checker workers")->check(CLI::PositiveNumber);
  replay->add_option("--dump", dump, "dump format")->check(CLI::IsMember({"xml", "yxml"}));
  replay->add_option("--out", out_path, "write dumps to this file");
  replay->add_option("--margin", margin, "format message bodies at this margin")
      ->check(CLI::PositiveNumber);
  replay->add_flag("--in-process", in_process, "run the checker on threads of this process");

  auto *bench = app.add_subcommand("bench", "time a script and report reuse");
  bench->add_option("script", script_path, "edit script")->required();
  bench->add_option("--workers", workers, "checker workers")->check(CLI::PositiveNumber);

  auto *serve = app.add_subcommand("serve", "serve the websocket endpoint /session");
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--workers", workers, "checker workers")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? pide::kExitOk : pide::kExitUsage;
  }

  pide::SessionOptions session_options;
  if (!in_process)
    session_options.checker_path = default_checker_path();
  if (auto w = env_workers(); w && !workers)
    workers = w;
  if (workers)
    session_options.workers = *workers;

  if (replay->parsed()) {
    std::vector<pide::script::Line> lines;
    if (!load_script(script_path, lines))
      return pide::kExitUsage;
    pide::ReplayOptions options;
    options.dump.stable = stable;
    options.dump.format = dump == "yxml" ? pide::DumpFormat::yxml : pide::DumpFormat::xml;
    options.dump.margin = margin;
    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) {
        std::cerr << "pide: cannot write " << out_path << '\n';
        return pide::kExitUsage;
      }
    }
    std::ostream &out = out_path.empty() ? std::cout : file;
    try {
      pide::Session session(session_options);
      int rc = pide::replay(lines, session, out, std::cerr, options);
      session.shutdown();
      print_diagnostics(session);
      if (rc == pide::kExitOk && session.failed())
        rc = pide::kExitCheckerFailure;
      return rc;
    } catch (const std::exception &ex) {
      std::cerr << "pide: " << ex.what() << '\n';
      return pide::kExitCheckerFailure;
    }
  }

  if (bench->parsed()) {
    std::vector<pide::script::Line> lines;
    if (!load_script(script_path, lines))
      return pide::kExitUsage;
    try {
      auto report = pide::bench(lines, session_options);
      std::cout << report.dump(2) << '\n';
      return report["ok"].get<bool>() ? pide::kExitOk : pide::kExitCheckerFailure;
    } catch (const std::exception &ex) {
      std::cerr << "pide: " << ex.what() << '\n';
      return pide::kExitCheckerFailure;
    }
  }

  try {
    pide::Session session(session_options);
    pide::service::Service service(session, listen);
    std::cerr << "pide: serving ws://" << listen << pide::service::kEndpoint << " (port "
              << service.port() << ")\n";
    service.run();
    session.shutdown();
    print_diagnostics(session);
    return session.failed() ? pide::kExitCheckerFailure : pide::kExitOk;
  } catch (const std::exception &ex) {
    std::cerr << "pide: " << ex.what() << '\n';
    return pide::kExitCheckerFailure;
  }
}
