#include "protosynth/properties.hpp"

#include <algorithm>

namespace protosynth {

std::string to_string(PropertyId id) { return "P" + std::to_string(static_cast<int>(id)); }

bool PropertyVerdict::violates(PropertyId id) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.property == id; });
}

namespace {

constexpr int kAbort = 0;
constexpr int kCommit = 1;

bool is_alive(std::uint32_t mask, std::size_t p) { return (mask >> p & 1u) != 0; }

/// Index of the initial state shared by every process, or -1.
int uniform_initial(const StateSpace& space, std::span<const StateId> init) {
  if (init.empty()) return -1;
  for (StateId s : init) {
    if (s != init[0]) return -1;
  }
  return space.local_index(init[0]);
}

bool contains_initial(const StateSpace& space, std::span<const StateId> init, int local) {
  return std::any_of(init.begin(), init.end(), [&](StateId s) { return s == space.initial(local); });
}

/// Decision every alive process must reach, if the antecedents force one.
std::optional<StateId> forced_decision(PropertySet props, const StateSpace& space,
                                       std::span<const StateId> init, bool any_loss) {
  if (props == PropertySet::consensus) {
    const int u = uniform_initial(space, init);
    if (u >= 0) return space.decision(u);
    return std::nullopt;
  }
  if (contains_initial(space, init, kAbort)) return space.decision(kAbort);
  if (!any_loss && uniform_initial(space, init) == kCommit) return space.decision(kCommit);
  return std::nullopt;
}

PropertyId forced_property(PropertySet props, const StateSpace& space, StateId forced) {
  if (props == PropertySet::consensus) {
    return space.local_index(forced) == 1 ? PropertyId::P2 : PropertyId::P3;
  }
  return space.local_index(forced) == kCommit ? PropertyId::P2 : PropertyId::P3;
}

}  // namespace

bool outcome_ok(PropertySet props, const StateSpace& space, std::span<const StateId> init,
                bool any_loss, std::span<const StateId> decisions, std::uint32_t final_alive) {
  const auto forced = forced_decision(props, space, init, any_loss);
  StateId first = kNoState;
  for (std::size_t p = 0; p < decisions.size(); ++p) {
    if (!is_alive(final_alive, p)) continue;
    const StateId d = decisions[p];
    if (d == kNoState) return false;
    if (first == kNoState) first = d;
    else if (d != first) return false;
    if (forced && d != *forced) return false;
  }
  return true;
}

PropertyVerdict evaluate_outcome(const ProtocolSpec& spec, const StateSpace& space,
                                 std::span<const StateId> init, bool any_loss,
                                 std::span<const StateId> decisions, std::uint32_t final_alive) {
  PropertyVerdict v;
  const std::size_t n = decisions.size();

  // P1: no two alive processes decide differently.
  std::size_t first = n;
  std::vector<int> conflicting;
  for (std::size_t p = 0; p < n; ++p) {
    if (!is_alive(final_alive, p) || decisions[p] == kNoState) continue;
    if (first == n) {
      first = p;
    } else if (decisions[p] != decisions[first]) {
      conflicting.push_back(static_cast<int>(p));
    }
  }
  if (!conflicting.empty()) {
    conflicting.insert(conflicting.begin(), static_cast<int>(first));
    v.violations.push_back({PropertyId::P1, std::move(conflicting)});
  }

  // P2 / P3: forced outcomes.
  if (const auto forced = forced_decision(spec.properties, space, init, any_loss)) {
    std::vector<int> wrong;
    for (std::size_t p = 0; p < n; ++p) {
      if (is_alive(final_alive, p) && decisions[p] != kNoState && decisions[p] != *forced) {
        wrong.push_back(static_cast<int>(p));
      }
    }
    if (!wrong.empty()) {
      v.violations.push_back({forced_property(spec.properties, space, *forced), std::move(wrong)});
    }
  }

  // P4: every alive process decides.
  std::vector<int> undecided;
  for (std::size_t p = 0; p < n; ++p) {
    if (is_alive(final_alive, p) && decisions[p] == kNoState) undecided.push_back(static_cast<int>(p));
  }
  if (!undecided.empty()) v.violations.push_back({PropertyId::P4, std::move(undecided)});

  std::sort(v.violations.begin(), v.violations.end(),
            [](const Violation& a, const Violation& b) { return a.property < b.property; });
  v.reward = v.violations.empty() ? 1 : -1;
  return v;
}

PropertyVerdict evaluate(const ProtocolSpec& spec, const StateSpace& space,
                         const Scenario& scenario, const ExecutionTrace& trace) {
  std::uint32_t alive = 0;
  for (std::size_t p = 0; p < trace.final_alive.size(); ++p) {
    if (trace.final_alive[p]) alive |= 1u << p;
  }
  return evaluate_outcome(spec, space, scenario.init, trace.any_loss, trace.decisions, alive);
}

std::optional<StateId> definite_decision(const ProtocolSpec& spec, const StateSpace& space,
                                         std::span<const StateId> init, bool allow_losses) {
  if (spec.properties == PropertySet::consensus) {
    const int u = uniform_initial(space, init);
    if (u >= 0) return space.decision(u);
    return std::nullopt;
  }
  if (contains_initial(space, init, kAbort)) return space.decision(kAbort);
  if (!allow_losses) return space.decision(kCommit);
  return std::nullopt;
}

namespace {

void require_builtin_setting(const Setting& setting) {
  setting.validate();
  if (setting.k < 2) throw ConfigError("builtin protocols need k >= 2");
}

template <typename Rule>
StateMachine fill_machine(const ProtocolSpec& spec, const Setting& setting,
                          const StateSpace& space, Rule rule) {
  StateMachine m(spec.name, setting, space);
  for (std::size_t i = 0; i < m.num_keys(); ++i) {
    m.set_index(i, rule(m.indexer().key(i)));
  }
  return m;
}

}  // namespace

StateMachine builtin_floodset(const ProtocolSpec& spec, const Setting& setting,
                              const StateSpace& space) {
  if (spec.properties != PropertySet::consensus) {
    throw SettingMismatch("floodset needs the consensus property set");
  }
  require_builtin_setting(setting);
  const StateId zero_init = space.initial(0);
  const StateId seen_zero = space.internal(0);
  return fill_machine(spec, setting, space, [&](const TransitionKey& key) {
    auto indicates_zero = [&](StateId s) { return s == zero_init || s == seen_zero; };
    const bool zero = indicates_zero(key.own) ||
                      std::any_of(key.others.begin(), key.others.end(), indicates_zero);
    if (key.round == setting.rounds) return zero ? space.decision(0) : space.decision(1);
    return zero ? space.internal(0) : space.internal(1);
  });
}

StateMachine builtin_atomic_commit(const ProtocolSpec& spec, const Setting& setting,
                                   const StateSpace& space) {
  if (spec.properties != PropertySet::atomic_commit) {
    throw SettingMismatch("the atomic-commit builtin needs the atomic-commit property set");
  }
  require_builtin_setting(setting);
  const StateId commit_init = space.initial(kCommit);
  const StateId ready = space.internal(0);
  return fill_machine(spec, setting, space, [&](const TransitionKey& key) {
    bool go;
    if (key.round == 1) {
      go = key.own == commit_init &&
           std::all_of(key.others.begin(), key.others.end(),
                       [&](StateId s) { return s == commit_init; });
    } else {
      go = key.own == ready && std::all_of(key.others.begin(), key.others.end(), [&](StateId s) {
             return s == ready || space.is_lost(s);
           });
    }
    if (key.round == setting.rounds) return go ? space.decision(kCommit) : space.decision(kAbort);
    return go ? space.internal(0) : space.internal(1);
  });
}

}  // namespace protosynth
