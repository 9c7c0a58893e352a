#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace stretch_ranger {

enum class ErrorKind {
  invalid_parameter,
  invalid_configuration,
  out_of_range,
  aliasing_risk,
  regime_violation,
  no_signal,
  estimation_failure,
  fit_failure,
  low_signal,
  non_monotone,
  parse_error,
  io_error,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_configuration: return "invalid-configuration";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::aliasing_risk: return "aliasing-risk";
    case ErrorKind::regime_violation: return "regime-violation";
    case ErrorKind::no_signal: return "no-signal";
    case ErrorKind::estimation_failure: return "estimation-failure";
    case ErrorKind::fit_failure: return "fit-failure";
    case ErrorKind::low_signal: return "low-signal";
    case ErrorKind::non_monotone: return "non-monotone";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

// Single exception type for every domain failure. `stage` names the pipeline
// step that raised it when the error crossed a runner boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

  // Value the caller can fall back to: the nearest valid endpoint for
  // out-of-range errors, the model discrepancy for regime violations.
  const std::optional<double>& hint() const noexcept { return hint_; }

  Error& with_stage(std::string stage) {
    stage_ = std::move(stage);
    return *this;
  }
  Error& with_hint(double value) {
    hint_ = value;
    return *this;
  }

  std::string describe() const {
    std::string out = to_string(kind_);
    if (!stage_.empty()) out += " [" + stage_ + "]";
    out += ": ";
    out += what();
    return out;
  }

 private:
  ErrorKind kind_;
  std::string stage_;
  std::optional<double> hint_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace stretch_ranger
