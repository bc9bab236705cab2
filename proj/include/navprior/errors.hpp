#pragma once

#include <stdexcept>
#include <string>

namespace navprior {

// Exit codes surfaced by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kSamplerExhausted = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files, inconsistent datasets, missing environments.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed a node id that is not in the graph.
class UnknownNodeError : public std::out_of_range {
 public:
  explicit UnknownNodeError(const std::string& id)
      : std::out_of_range("unknown node id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

struct SamplerDiagnostics {
  int attempts = 0;
  int dead_ends = 0;
  int too_close = 0;
  int unreachable = 0;
  int out_of_window = 0;
};

class SamplerExhaustedError : public std::runtime_error {
 public:
  SamplerExhaustedError(const std::string& env_id, SamplerDiagnostics diag)
      : std::runtime_error("sampler exhausted on env '" + env_id + "' after " +
                           std::to_string(diag.attempts) + " attempts (dead-ends=" +
                           std::to_string(diag.dead_ends) + ", too-close=" +
                           std::to_string(diag.too_close) + ", unreachable=" +
                           std::to_string(diag.unreachable) + ", hop-window=" +
                           std::to_string(diag.out_of_window) + ")"),
        env_id_(env_id),
        diag_(diag) {}

  const std::string& env_id() const noexcept { return env_id_; }
  const SamplerDiagnostics& diagnostics() const noexcept { return diag_; }

 private:
  std::string env_id_;
  SamplerDiagnostics diag_;
};

}  // namespace navprior
