// Child processes speaking newline-delimited JSON.
//
// taxcand/1 (candidate programs):
//   child -> {"protocol":"taxcand/1","scenario":N}          once, on start
//   parent -> {"id":k,"profile":{...}}
//   child -> {"id":k,"result":2168.00} | {"id":k,"error":"..."}
#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

#include "taxmorph/tax_function.hpp"

namespace taxmorph {

inline constexpr const char* kCandidateProtocol = "taxcand/1";
inline constexpr const char* kGeneratorProtocol = "taxgen/1";

/// A launched child with piped stdin/stdout. Killed and reaped on
/// destruction.
class ChildProcess {
 public:
  ChildProcess(const std::vector<std::string>& command, const std::vector<std::string>& extra_env = {});
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Writes one line (a trailing newline is added). False if the pipe broke.
  bool write_line(const std::string& line);
  /// Reads one line, without its newline. nullopt on EOF or timeout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  bool timed_out() const { return timed_out_; }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool timed_out_ = false;
};

struct CandidateProgram {
  std::vector<std::string> command;
  std::string protocol = kCandidateProtocol;
  std::chrono::milliseconds timeout{5000};
  std::vector<std::string> env;  // extra NAME=value entries

  /// Runs `shell_command` through /bin/sh.
  static CandidateProgram from_shell(const std::string& shell_command);
  std::string id() const;
};

/// A TaxFunction backed by one long-lived candidate process. The handshake
/// happens in the constructor; a failed handshake throws
/// CandidateUnavailable. After a crash or timeout every later evaluation
/// fails fast.
class CandidateFunction final : public TaxFunction {
 public:
  explicit CandidateFunction(const CandidateProgram& program);

  ScenarioId scenario() const override { return scenario_; }
  Money evaluate(const TaxpayerProfile& profile) override;
  std::string describe() const override { return "candidate:" + program_.id(); }

 private:
  CandidateProgram program_;
  std::unique_ptr<ChildProcess> child_;
  ScenarioId scenario_{1};
  long long next_id_ = 1;
  std::string dead_reason_;
};

/// Serves taxcand/1 on the given streams until EOF. Profiles are parsed
/// against `rules`; evaluation errors become error responses.
void serve_candidate(TaxFunction& f, const TaxRuleSet& rules, std::istream& in, std::ostream& out);

}  // namespace taxmorph
