#pragma once

#include <random>
#include <span>
#include <vector>

#include "protosynth/core_model.hpp"

namespace protosynth {

using Rng = std::mt19937_64;

/// Curriculum stage. For id q < r crashes happen only in rounds r-q..r and
/// initial vectors must have a definite decision; id r allows crashes in every
/// round with definite inits; id r+1 (the final phase) allows everything.
struct Phase {
  int id = 0;

  static Phase final_phase(const Setting& s) { return {s.rounds + 1}; }
  bool is_final(const Setting& s) const { return id >= s.rounds + 1; }
  int first_crash_round(const Setting& s) const { return id < s.rounds ? s.rounds - id : 1; }
  bool definite_inits_only(const Setting& s) const { return id <= s.rounds; }

  friend bool operator==(const Phase&, const Phase&) = default;
};

/// Allowed initial vectors of the phase, lexicographic in state ids.
std::vector<std::vector<StateId>> enumerate_init_patterns(const Setting& setting,
                                                          const ProtocolSpec& spec,
                                                          const StateSpace& space, Phase phase);

/// Crash patterns of the phase (init left empty): every crash set of at most
/// f processes, each crash round in range and each delivery subset. The
/// no-crash pattern comes first.
std::vector<std::vector<Crash>> enumerate_loss_patterns(const Setting& setting, Phase phase);

/// Cross product of init patterns (outer) and loss patterns (inner).
std::vector<Scenario> enumerate_scenarios(const Setting& setting, const ProtocolSpec& spec,
                                          const StateSpace& space, Phase phase);

/// Draws from `failed` with probability 0.7 when it is non-empty, otherwise
/// uniformly from `phase_scenarios`.
const Scenario& sample_scenario(std::span<const Scenario> phase_scenarios,
                                std::span<const Scenario> failed, Rng& rng);

/// Same rule with the branch variable `u` supplied by the caller.
const Scenario& sample_scenario_with(double u, std::span<const Scenario> phase_scenarios,
                                     std::span<const Scenario> failed, Rng& rng);

inline constexpr double kFreshScenarioProbability = 0.3;

}  // namespace protosynth
