#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protosynth/core_model.hpp"
#include "protosynth/freezer.hpp"
#include "protosynth/policy.hpp"
#include "protosynth/properties.hpp"
#include "protosynth/scenario_gen.hpp"
#include "protosynth/simulator.hpp"

namespace protosynth {

struct Counterexample {
  Scenario scenario;
  std::vector<PropertyId> violated;
  std::uint64_t digest = 0;  // hash of the execution's per-round outputs

  friend bool operator==(const Counterexample&, const Counterexample&) = default;
};

struct ValidateOptions {
  int threads = 0;  // 0: hardware concurrency
};

/// FNV-1a over the sent and output states of every round.
std::uint64_t trace_digest(const ExecutionTrace& trace);

/// Runs every scenario of the phase and returns the failing ones in
/// enumeration order (init patterns outer, loss patterns inner).
std::vector<Counterexample> validate(const StateMachine& machine, const ProtocolSpec& spec, Phase phase,
                                     const ValidateOptions& options = {});

/// Same over an explicit scenario list, in list order.
std::vector<Counterexample> validate_scenarios(const StateMachine& machine, const ProtocolSpec& spec,
                                               std::span<const Scenario> scenarios,
                                               const ValidateOptions& options = {});

/// Fills in the violated ids and digest of a failing scenario.
Counterexample explain(const StateMachine& machine, const ProtocolSpec& spec, const Scenario& scenario);

/// Pinned outputs where frozen, otherwise the model's most likely legal output.
StateMachine inference_machine(const PolicyModel& model, const FreezeList& frozen,
                               const std::string& spec_name);

}  // namespace protosynth
