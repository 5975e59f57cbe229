#pragma once

#include <stdexcept>
#include <string>

namespace rlsdp {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  index_out_of_range,
  numerical,
  infeasible,
  empty_dataset,
  too_few_samples,
  // cycle engine
  unknown_cycle,
  unknown_participant,
  concurrent_cycle,
  wrong_phase,
  exhausted,
  unassigned_exercise,
  duplicate_vote,
  results_not_ready,
  no_responses,
  inference_failed,
  corrupt_log,
  io,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::index_out_of_range: return "index_out_of_range";
    case Errc::numerical: return "numerical";
    case Errc::infeasible: return "infeasible";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::too_few_samples: return "too_few_samples";
    case Errc::unknown_cycle: return "unknown_cycle";
    case Errc::unknown_participant: return "unknown_participant";
    case Errc::concurrent_cycle: return "concurrent_cycle";
    case Errc::wrong_phase: return "wrong_phase";
    case Errc::exhausted: return "exhausted";
    case Errc::unassigned_exercise: return "unassigned_exercise";
    case Errc::duplicate_vote: return "duplicate_vote";
    case Errc::results_not_ready: return "results_not_ready";
    case Errc::no_responses: return "no_responses";
    case Errc::inference_failed: return "inference_failed";
    case Errc::corrupt_log: return "corrupt_log";
    case Errc::io: return "io";
  }
  return "unknown";
}

/// Every failure in the library surfaces as an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rlsdp
