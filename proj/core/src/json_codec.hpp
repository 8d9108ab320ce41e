// Internal JSON helpers shared by the manifest encoders. Not installed.
#pragma once

#include <nlohmann/json.hpp>
#include "wdiv/diff.hpp"
#include "wdiv/exec.hpp"

namespace wdiv::codec {

using json = nlohmann::ordered_json;

json stream_to_json(const StreamCapture& capture);
StreamCapture stream_from_json(const json& j);

json termination_to_json(const Termination& termination);
Termination termination_from_json(const json& j);

json outcome_to_json(const ExecutionOutcome& outcome);
ExecutionOutcome outcome_from_json(const json& j);

json divergence_to_json(const DivergenceRecord& record);
DivergenceRecord divergence_from_json(const json& j);

/// Dumps with invalid UTF-8 replaced, so arbitrary program output never throws.
inline std::string dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace wdiv::codec
