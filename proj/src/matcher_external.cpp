#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "corrkit/interchange.hpp"
#include "corrkit/matcher.hpp"

extern char** environ;

namespace corrkit {
namespace {

std::atomic<std::uint64_t> g_invocation{0};

std::string substitute(std::string token, const std::string& key, const std::string& value) {
  for (auto pos = token.find(key); pos != std::string::npos; pos = token.find(key, pos + value.size())) {
    token.replace(pos, key.size(), value);
  }
  return token;
}

std::string safe_name(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return out;
}

enum class RunResult { Exited, Timeout, SpawnFailed };

RunResult run_with_timeout(const std::vector<std::string>& args, const std::filesystem::path& cwd,
                           const std::filesystem::path& log, double timeout_s, int& exit_code) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  if (!cwd.empty()) posix_spawn_file_actions_addchdir_np(&actions, cwd.c_str());

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) return RunResult::SpawnFailed;

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  while (true) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return RunResult::Timeout;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  return RunResult::Exited;
}

}  // namespace

MatchOutcome match_external(const FrameSource& a, const FrameSource& b, const ExternalParams& params,
                            const std::string& source) {
  MatchOutcome out;
  out.set.frame_a = a.id;
  out.set.frame_b = b.id;

  std::filesystem::path work = params.working_dir.empty()
                                   ? std::filesystem::temp_directory_path() / "corrkit-external"
                                   : params.working_dir;
  std::error_code ec;
  std::filesystem::create_directories(work, ec);
  work = std::filesystem::absolute(work);
  const std::string stem = safe_name(source) + "_" + safe_name(a.id.to_string()) + "_" +
                           safe_name(b.id.to_string()) + "_" + std::to_string(getpid()) + "_" +
                           std::to_string(g_invocation.fetch_add(1));
  const auto out_path = work / (stem + ".corrs");
  const auto log_path = work / (stem + ".log");
  std::filesystem::remove(out_path, ec);

  std::vector<std::string> args;
  {
    std::istringstream ss(params.command);
    std::string tok;
    while (ss >> tok) {
      tok = substitute(tok, "{image_a}", std::filesystem::absolute(a.path).string());
      tok = substitute(tok, "{image_b}", std::filesystem::absolute(b.path).string());
      tok = substitute(tok, "{out}", out_path.string());
      args.push_back(tok);
    }
  }
  if (args.empty()) {
    out.status = MatchStatus::ProcessFailure;
    out.message = "empty command";
    return out;
  }

  int exit_code = 0;
  switch (run_with_timeout(args, params.working_dir, log_path, params.timeout_seconds, exit_code)) {
    case RunResult::SpawnFailed:
      out.status = MatchStatus::ProcessFailure;
      out.message = "could not spawn '" + args[0] + "'";
      return out;
    case RunResult::Timeout:
      out.status = MatchStatus::Timeout;
      out.message = "timed out after " + std::to_string(params.timeout_seconds) + " s";
      std::filesystem::remove(out_path, ec);
      return out;
    case RunResult::Exited:
      break;
  }
  if (exit_code != 0) {
    out.status = MatchStatus::ProcessFailure;
    out.message = "exit code " + std::to_string(exit_code) + " (log: " + log_path.string() + ")";
    return out;
  }
  try {
    CorrespondenceSet parsed = read_corrs(out_path, a.size, b.size);
    out.set.matches = std::move(parsed.matches);
    for (Match& m : out.set.matches) m.source = source;
    std::filesystem::remove(out_path, ec);
    std::filesystem::remove(log_path, ec);
  } catch (const Error& e) {
    out.status = e.code() == ErrorCode::IoError ? MatchStatus::ProcessFailure : MatchStatus::ParseError;
    out.message = e.what();
  }
  return out;
}

}  // namespace corrkit
