#ifndef PIDE_TESTS_HELPERS_HPP
#define PIDE_TESTS_HELPERS_HPP

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pide/session.hpp"

extern char **environ;

namespace testing_support {

inline pide::SessionOptions checker_options(unsigned workers = 0) {
  pide::SessionOptions o;
  o.checker_path = PIDE_CHECKER_PATH;
  o.workers = workers;
  return o;
}

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string read_all(int fd) {
  std::string s;
  std::array<char, 4096> buf{};
  for (;;) {
    ssize_t n = ::read(fd, buf.data(), buf.size());
    if (n < 0 && errno == EINTR)
      continue;
    if (n <= 0)
      break;
    s.append(buf.data(), static_cast<std::size_t>(n));
  }
  return s;
}

/// Runs a program to completion, capturing both output streams.
inline ProcessResult run_process(const std::vector<std::string> &args,
                                 const std::vector<std::string> &extra_env = {}) {
  int out[2], err[2];
  if (::pipe(out) != 0 || ::pipe(err) != 0)
    return {};
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out[1], 1);
  posix_spawn_file_actions_adddup2(&actions, err[1], 2);
  posix_spawn_file_actions_addclose(&actions, out[0]);
  posix_spawn_file_actions_addclose(&actions, err[0]);
  std::vector<std::string> copy = args;
  std::vector<char *> argv;
  for (auto &a : copy)
    argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_strings;
  for (char **e = environ; *e; ++e)
    env_strings.emplace_back(*e);
  for (const auto &e : extra_env)
    env_strings.push_back(e);
  std::vector<char *> envp;
  for (auto &e : env_strings)
    envp.push_back(e.data());
  envp.push_back(nullptr);
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, copy[0].c_str(), &actions, nullptr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  ::close(out[1]);
  ::close(err[1]);
  ProcessResult result;
  if (rc != 0) {
    ::close(out[0]);
    ::close(err[0]);
    return result;
  }
  std::string err_text;
  std::thread err_reader([&] { err_text = read_all(err[0]); });
  result.out = read_all(out[0]);
  err_reader.join();
  result.err = std::move(err_text);
  ::close(out[0]);
  ::close(err[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

/// A temporary file removed on destruction.
class TempFile {
public:
  explicit TempFile(const std::string &content, const std::string &suffix = ".pide") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pide-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + suffix);
    std::ofstream(path_) << content;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  std::string path() const { return path_.string(); }

private:
  std::filesystem::path path_;
};

inline bool process_alive(pid_t pid) { return ::kill(pid, 0) == 0; }

} // namespace testing_support

#endif // PIDE_TESTS_HELPERS_HPP
