// Checker process: serves the prover protocol on an inherited socket.

#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "pide/checker/checker.hpp"

int main(int argc, char **argv) {
  CLI::App app{"notepad calculus checker"};
  int fd = 3;
  unsigned workers = 0;
  bool stray = false;
  app.add_option("--fd", fd, "socket file descriptor")->check(CLI::NonNegativeNumber);
  app.add_option("--workers", workers, "evaluation workers")->check(CLI::PositiveNumber);
  app.add_flag("--stray-stdout", stray, "write diagnostic lines to standard output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    pide::checker::CheckerOptions options;
    if (workers > 0)
      options.workers = workers;
    options.stray_stdout = stray;
    pide::checker::Checker checker(fd, options);
    checker.run();
  } catch (const std::exception &ex) {
    std::fprintf(stderr, "pide-checker: %s\n", ex.what());
    return 1;
  }
  return 0;
}
