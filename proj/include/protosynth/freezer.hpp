#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "protosynth/core_model.hpp"
#include "protosynth/policy.hpp"

namespace protosynth {

/// No uniform, loss-free initial vector has a forced decision.
class NoDefiniteScenario : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The completion oracle was asked about more open keys than its bound.
class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FreezeOrigin { group, ambiguity };

struct FreezeEntry {
  std::size_t key_index = 0;
  TransitionKey key;
  StateId current = kNoState;
  std::vector<StateId> tried;  // ascending, always contains current
  FreezeOrigin origin = FreezeOrigin::ambiguity;
};

/// Stack of pinned transitions with an O(1) key lookup.
class FreezeList {
 public:
  FreezeList() = default;
  explicit FreezeList(std::size_t num_keys) : pos_(num_keys, -1) {}

  std::size_t size() const { return stack_.size(); }
  bool empty() const { return stack_.empty(); }
  std::size_t num_keys() const { return pos_.size(); }

  bool contains(std::size_t key_index) const { return pos_[key_index] >= 0; }
  /// Pinned output of a key, kNoState when free.
  StateId output(std::size_t key_index) const {
    const int p = pos_[key_index];
    return p < 0 ? kNoState : stack_[static_cast<std::size_t>(p)].current;
  }
  /// Bottom to top.
  const std::vector<FreezeEntry>& entries() const { return stack_; }

  /// Pushes a new top entry. Throws ConfigError if the key is already pinned.
  void push(FreezeEntry entry);
  /// Removes the entry for `key_index` wherever it sits and returns it.
  FreezeEntry remove(std::size_t key_index);

  /// Output per key index, kNoState where free.
  std::vector<StateId> table() const;

 private:
  std::vector<FreezeEntry> stack_;
  std::vector<int> pos_;
};

struct FreezeEvent {
  enum class Action { freeze, refreeze, discard };
  Action action = Action::freeze;
  std::size_t key_index = 0;
  StateId output = kNoState;
};

std::string_view to_string(FreezeEvent::Action a);

/// Pins the execution path of the lexicographically smallest uniform initial
/// vector whose loss-free run has a forced decision: rounds before the last
/// go to the first internal state, the last round to the forced decision.
FreezeList group_freeze(const ProtocolSpec& spec, const Setting& setting, const StateSpace& space);

struct AmbiguityRule {
  double min_prob = 0.2;
  double max_diff = 0.1;
  int interval = 5;  // episodes between two ambiguity freezes
};

/// At least two outputs reach min_prob and some such pair differs by at most max_diff.
bool is_ambiguous(std::span<const double> dist, const AmbiguityRule& rule);

/// Pins at most one ambiguous key, preferring later rounds and then fewer
/// lost inputs. Does nothing until `episodes_since_add` reaches the interval.
std::optional<FreezeEvent> determine_freezing(const TrainingBuffer& buffer, FreezeList& list,
                                              const KeyIndexer& indexer, int episodes_since_add,
                                              const AmbiguityRule& rule = {});

inline constexpr int kDefaultSolvableBound = 20;

/// Whether some choice of outputs for the free keys met along `scenario`
/// (adversary fixed) makes the execution correct. Throws TooLarge when a path
/// needs more than `bound` free keys.
bool scenario_solvable(const FreezeList& list, const Scenario& scenario, const ProtocolSpec& spec,
                       const Setting& setting, const StateSpace& space,
                       int bound = kDefaultSolvableBound);

struct UnfreezeQuery {
  bool oracle_enabled = true;
  const ProtocolSpec* spec = nullptr;
  const Setting* setting = nullptr;
  const StateSpace* space = nullptr;
  const Scenario* scenario = nullptr;
  int bound = kDefaultSolvableBound;
};

/// Backtracks after a failed run that used pinned keys: the topmost activated
/// entry moves to its smallest untried output, or is dropped when none is
/// left and the next activated entry is tried. Returns the events applied.
std::vector<FreezeEvent> determine_unfreeze(int reward, std::span<const std::size_t> activated,
                                            FreezeList& list, const KeyIndexer& indexer,
                                            const UnfreezeQuery& query);

}  // namespace protosynth
