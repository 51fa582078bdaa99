#pragma once
// Error taxonomy shared by all cmdp modules.
//
// Every failure raised by the library carries a stable machine-readable code,
// a human message, and an optional numeric payload (e.g. the residual of a
// projection solve that failed to converge).  The CLI serializes these to a
// JSON error record on exit.

#include <stdexcept>
#include <string>
#include <utility>

namespace cmdp {

enum class errc {
  precondition,      // caller violated a documented precondition
  dimension_mismatch,// shapes of inputs disagree
  invalid_weight,    // weight matrix outside the feasible set where required
  numeric_failure,   // an iterative numeric routine failed to converge
  invalid_input,     // rejected input value (non-finite, out-of-range index)
  planning_failure,  // NaN or other poison detected during planning
  io_failure,        // filesystem / serialization problem
  bad_config,        // malformed configuration file or option set
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::precondition:       return "precondition";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::invalid_weight:     return "invalid_weight";
    case errc::numeric_failure:    return "numeric_failure";
    case errc::invalid_input:      return "invalid_input";
    case errc::planning_failure:   return "planning_failure";
    case errc::io_failure:         return "io_failure";
    case errc::bad_config:         return "bad_config";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, std::string message, double payload = 0.0)
      : std::runtime_error(std::move(message)), code_(code), payload_(payload) {}

  errc code() const noexcept { return code_; }
  // Context-dependent numeric payload; for numeric_failure this is the last
  // objective decrease (residual) observed before the iteration cap.
  double payload() const noexcept { return payload_; }

 private:
  errc code_;
  double payload_;
};

inline void require(bool cond, errc code, const std::string& msg, double payload = 0.0) {
  if (!cond) throw error(code, msg, payload);
}

}  // namespace cmdp
