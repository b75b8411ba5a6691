#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protosynth/core_model.hpp"
#include "protosynth/simulator.hpp"

namespace protosynth {

enum class PropertyId { P1 = 1, P2 = 2, P3 = 3, P4 = 4 };

std::string to_string(PropertyId id);

struct Violation {
  PropertyId property;
  std::vector<int> processes;  // witnesses

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct PropertyVerdict {
  int reward = 1;  // +1 iff no violations
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool violates(PropertyId id) const;
};

/// Evaluates the property family against one finished execution.
///
/// `decisions[p]` is the decision id of p or kNoState; bit p of `final_alive`
/// marks processes that never crashed. Antecedents range over every
/// process's initial state, consequents over alive processes only.
PropertyVerdict evaluate_outcome(const ProtocolSpec& spec, const StateSpace& space,
                                 std::span<const StateId> init, bool any_loss,
                                 std::span<const StateId> decisions, std::uint32_t final_alive);

PropertyVerdict evaluate(const ProtocolSpec& spec, const StateSpace& space,
                         const Scenario& scenario, const ExecutionTrace& trace);

/// Cheap pass/fail form of evaluate_outcome for the search and verifier loops.
bool outcome_ok(PropertySet props, const StateSpace& space, std::span<const StateId> init,
                bool any_loss, std::span<const StateId> decisions, std::uint32_t final_alive);

/// The decision every correct machine must reach from `init`, when the
/// property family forces one for all scenarios (losses allowed or not).
std::optional<StateId> definite_decision(const ProtocolSpec& spec, const StateSpace& space,
                                         std::span<const StateId> init, bool allow_losses);

/// FloodSet reduced to two internal states: internal:a means "a 0 was seen",
/// internal:b means "only 1s were seen". Decides decision:0 iff a 0 was seen.
StateMachine builtin_floodset(const ProtocolSpec& spec, const Setting& setting,
                              const StateSpace& space);

/// Synchronous atomic commit: round 1 stays internal:a only on a full set of
/// commit votes with nothing lost, later rounds keep internal:a only while
/// every received state is internal:a, the last round commits iff so.
StateMachine builtin_atomic_commit(const ProtocolSpec& spec, const Setting& setting,
                                   const StateSpace& space);

}  // namespace protosynth
