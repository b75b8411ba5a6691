#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "protosynth/core_model.hpp"

namespace protosynth {

inline constexpr int kMaxProcesses = 16;

/// Full record of one synchronous execution.
///
/// Vectors indexed [round-1][process]. A process sends in round t iff its
/// crash round is >= t; it computes in round t (is in alive(t)) iff its crash
/// round is > t. Received vectors hold the other processes' messages in
/// ascending sender order, with the lost id for missing messages.
struct ExecutionTrace {
  int n = 0;
  int rounds = 0;
  std::vector<std::vector<StateId>> sent;                   // kNoState: nothing sent
  std::vector<std::vector<std::vector<StateId>>> received;  // empty: did not compute
  std::vector<std::vector<StateId>> output;                 // kNoState: no output
  std::vector<std::vector<bool>> alive;
  std::vector<bool> final_alive;    // never crashed
  std::vector<StateId> decisions;   // decision id, or kNoState (undecided / crashed)
  std::vector<TransitionKey> encountered;
  bool any_loss = false;
};

/// Executes `machine` under `scenario`. A missing transition leaves the
/// process undecided and silent for the rest of the run.
ExecutionTrace run(const StateMachine& machine, const Scenario& scenario);

/// Allocation-free summary used by the verifier's hot loop.
struct Outcome {
  std::array<StateId, kMaxProcesses> decisions{};
  std::uint32_t final_alive = 0;  // bit p set iff p never crashes
  bool any_loss = false;
};

Outcome run_outcome(const StateMachine& machine, const Scenario& scenario);

/// One line per round per sending process:
/// `r=1 p=2 sent=init:0 recv=[init:0,LOST] -> internal:b`.
std::string format_trace(const ExecutionTrace& trace, const StateSpace& space);

}  // namespace protosynth
