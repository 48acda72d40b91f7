#include "taxmorph/candidate.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <istream>
#include <mutex>
#include <ostream>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"

extern char** environ;

namespace taxmorph {

using nlohmann::json;

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    for (int& fd : fds_) {
      if (fd >= 0) ::close(fd);
    }
  }
  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  int release_read() { return std::exchange(fds_[0], -1); }
  int release_write() { return std::exchange(fds_[1], -1); }

 private:
  int fds_[2] = {-1, -1};
};

}  // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& command, const std::vector<std::string>& extra_env) {
  if (command.empty()) throw Error("empty command");
  ignore_sigpipe();
  Pipe in;
  Pipe out;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.read_end(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.write_end(), STDOUT_FILENO);

  std::vector<char*> argv;
  for (const auto& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
  argv.push_back(nullptr);

  std::vector<std::string> env_storage;
  for (char** e = environ; *e; ++e) env_storage.emplace_back(*e);
  for (const auto& extra : extra_env) env_storage.push_back(extra);
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);

  // Own process group, so a shell wrapper and everything it started can be
  // killed together.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  const int rc = posix_spawnp(&pid_, argv[0], &actions, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw Error("cannot launch '" + command[0] + "': " + std::strerror(rc));

  to_child_ = in.release_write();
  from_child_ = out.release_read();
}

ChildProcess::~ChildProcess() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin lets well-behaved children exit on their own.
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(5000);
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

bool ChildProcess::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    written += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> ChildProcess::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  timed_out_ = false;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out_ = true;
      return std::nullopt;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

CandidateProgram CandidateProgram::from_shell(const std::string& shell_command) {
  CandidateProgram p;
  p.command = {"/bin/sh", "-c", shell_command};
  return p;
}

std::string CandidateProgram::id() const {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& part : command) {
    for (unsigned char c : part) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
    hash ^= 0xff;
    hash *= 1099511628211ULL;
  }
  char text[17];
  std::snprintf(text, sizeof(text), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(text, 12);
}

CandidateFunction::CandidateFunction(const CandidateProgram& program) : program_(program) {
  if (program.protocol != kCandidateProtocol) {
    throw CandidateUnavailable("unsupported candidate protocol '" + program.protocol + "'");
  }
  try {
    child_ = std::make_unique<ChildProcess>(program.command, program.env);
  } catch (const Error& e) {
    throw CandidateUnavailable(e.what());
  }
  const auto line = child_->read_line(program.timeout);
  if (!line) {
    throw CandidateUnavailable(child_->timed_out() ? "handshake timed out" : "candidate exited before handshake");
  }
  json hello;
  try {
    hello = json::parse(*line);
  } catch (const json::parse_error&) {
    throw CandidateUnavailable("handshake is not JSON: " + *line);
  }
  if (!hello.is_object() || hello.value("protocol", std::string{}) != kCandidateProtocol) {
    throw CandidateUnavailable("handshake must declare protocol taxcand/1: " + *line);
  }
  if (!hello.contains("scenario") || !hello.at("scenario").is_number_integer()) {
    throw CandidateUnavailable("handshake must carry an integer scenario");
  }
  try {
    scenario_ = ScenarioId(hello.at("scenario").get<int>());
  } catch (const InputError& e) {
    throw CandidateUnavailable(e.what());
  }
}

Money CandidateFunction::evaluate(const TaxpayerProfile& profile) {
  if (!dead_reason_.empty()) throw EvaluationError(dead_reason_);
  const long long id = next_id_++;
  JsonWriter w;
  w.begin_object().key("id").value(static_cast<std::int64_t>(id)).key("profile");
  write_profile(w, profile);
  w.end_object();
  if (!child_->write_line(w.str())) {
    dead_reason_ = "candidate process is gone";
    throw EvaluationError(dead_reason_);
  }
  const auto line = child_->read_line(program_.timeout);
  if (!line) {
    dead_reason_ = child_->timed_out() ? "candidate timed out" : "candidate exited";
    throw EvaluationError(dead_reason_);
  }
  json reply;
  try {
    reply = json::parse(*line);
  } catch (const json::parse_error&) {
    throw EvaluationError("protocol error: response is not JSON");
  }
  if (!reply.is_object() || !reply.contains("id") || reply.at("id") != id) {
    throw EvaluationError("protocol error: response id mismatch");
  }
  if (reply.contains("error")) {
    throw EvaluationError("candidate error: " + (reply.at("error").is_string() ? reply.at("error").get<std::string>()
                                                                                : reply.at("error").dump()));
  }
  if (!reply.contains("result") || !reply.at("result").is_number()) {
    throw EvaluationError("protocol error: response carries no numeric result");
  }
  return Money::from_double_rounded(reply.at("result").get<double>());
}

void serve_candidate(TaxFunction& f, const TaxRuleSet& rules, std::istream& in, std::ostream& out) {
  {
    JsonWriter w;
    w.begin_object().key("protocol").value(kCandidateProtocol).key("scenario").value(f.scenario().value()).end_object();
    out << w.str() << '\n' << std::flush;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    JsonWriter w;
    w.begin_object();
    json request;
    try {
      request = json::parse(line);
    } catch (const json::parse_error&) {
      w.key("id").null().key("error").value("request is not JSON").end_object();
      out << w.str() << '\n' << std::flush;
      continue;
    }
    if (request.contains("id") && request.at("id").is_number_integer()) {
      w.key("id").value(request.at("id").get<std::int64_t>());
    } else {
      w.key("id").null();
    }
    try {
      if (!request.contains("profile")) throw InputError("request has no profile");
      const auto profile = profile_from_json(request.at("profile"), rules, "profile");
      w.key("result").money(f.evaluate(profile));
    } catch (const std::exception& e) {
      w.key("error").value(e.what());
    }
    w.end_object();
    out << w.str() << '\n' << std::flush;
  }
}

}  // namespace taxmorph
