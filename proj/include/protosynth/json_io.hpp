#pragma once

#include <string>

#include <json.hpp>

#include "protosynth/core_model.hpp"

namespace protosynth {

// Machine JSON:
//   {"spec": name, "setting": {n, r, f, k, use_proc_id},
//    "legend": {"0": "decision:0", ...},
//    "transitions": [{"round": t, "own": id, "others": [ids], "out": id}]}
// Transitions carry "proc_id" when process ids are enabled.

nlohmann::json machine_to_json(const StateMachine& machine);
/// Rebuilds the state space from the spec name and k; the legend must agree.
StateMachine machine_from_json(const nlohmann::json& j);

// Scenario JSON: {"init": [ids], "crashes": [{"proc": p, "round": t, "delivered_to": [procs]}]}

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace protosynth
