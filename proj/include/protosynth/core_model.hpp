#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace protosynth {

/// Integer id of a state label inside a StateSpace.
using StateId = std::int16_t;

/// Marker for "no output": a missing transition or a process without a decision.
inline constexpr StateId kNoState = -1;

/// Raised when a spec, setting, machine or scenario is malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a builtin protocol is requested for the wrong property set.
class SettingMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class PropertySet { consensus, atomic_commit };

std::string_view to_string(PropertySet p);
PropertySet parse_property_set(std::string_view s);

/// What the designer supplies: initial labels, decision labels and the
/// property family that defines correctness.
struct ProtocolSpec {
  std::string name;
  std::vector<std::string> initial_states;
  std::vector<std::string> decision_states;
  PropertySet properties = PropertySet::consensus;

  /// Binary consensus: init:0/init:1, decision:0/decision:1.
  static ProtocolSpec consensus();
  /// Atomic commit: abort is index 0, commit is index 1 in both lists.
  static ProtocolSpec atomic_commit();
  static ProtocolSpec for_properties(PropertySet p);

  void validate() const;
};

/// Process count, rounds, crash budget, internal-state count.
struct Setting {
  int n = 2;
  int rounds = 2;
  int f = 1;
  int k = 2;
  bool use_proc_id = false;

  void validate() const;
  friend bool operator==(const Setting&, const Setting&) = default;
};

enum class StateKind { decision, internal, lost, initial };

/// Dense id layout: decisions [0, d), internals [d, d+k), lost = d+k,
/// initials [d+k+1, d+k+1+x).
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(std::vector<std::string> decision_labels, int k,
             std::vector<std::string> initial_labels);

  int num_decisions() const { return d_; }
  int num_internals() const { return k_; }
  int num_initials() const { return x_; }
  /// Total alphabet size, d + k + 1 + x.
  int size() const { return d_ + k_ + 1 + x_; }

  StateId decision(int i) const { return static_cast<StateId>(i); }
  StateId internal(int i) const { return static_cast<StateId>(d_ + i); }
  StateId lost() const { return static_cast<StateId>(d_ + k_); }
  StateId initial(int i) const { return static_cast<StateId>(d_ + k_ + 1 + i); }

  bool is_decision(StateId s) const { return s >= 0 && s < d_; }
  bool is_internal(StateId s) const { return s >= d_ && s < d_ + k_; }
  bool is_lost(StateId s) const { return s == d_ + k_; }
  bool is_initial(StateId s) const { return s > d_ + k_ && s < size(); }
  bool valid(StateId s) const { return s >= 0 && s < size(); }

  StateKind kind(StateId s) const;
  /// Index of the state within its own category.
  int local_index(StateId s) const;

  const std::string& label(StateId s) const;
  StateId parse(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  int d_ = 0;
  int k_ = 0;
  int x_ = 0;
  std::vector<std::string> labels_;
};

inline constexpr std::string_view kLostLabel = "LOST";

/// Builds the id layout for `spec` with `k` internal states
/// (internal:a, internal:b, ...).
StateSpace encode_state_space(const ProtocolSpec& spec, int k);

/// Input of one transition: round, optional process id, own state and the
/// states received from the other processes in ascending sender order.
struct TransitionKey {
  int round = 1;
  std::optional<int> proc_id;
  StateId own = 0;
  std::vector<StateId> others;

  int lost_count(const StateSpace& space) const;
  std::string to_string(const StateSpace& space) const;

  friend auto operator<=>(const TransitionKey&, const TransitionKey&) = default;
  friend bool operator==(const TransitionKey&, const TransitionKey&) = default;
};

/// Bijection between the legal keys of a setting and [0, size()).
///
/// Round 1 keys draw own from the initials and others from initials plus
/// lost; later rounds use internals plus lost. With process ids enabled each
/// block is repeated per process.
class KeyIndexer {
 public:
  KeyIndexer() = default;
  KeyIndexer(const Setting& setting, const StateSpace& space);

  std::size_t size() const { return total_; }

  /// Dense index of a key, or npos when the key is not legal.
  std::size_t index(int round, int proc_id, StateId own,
                    std::span<const StateId> others) const;
  std::size_t index(const TransitionKey& key) const;
  TransitionKey key(std::size_t index) const;

  bool is_legal(const TransitionKey& key) const { return index(key) != npos; }

  /// Outputs a machine may choose for keys of this round.
  std::span<const StateId> legal_outputs(int round) const;
  bool is_legal_output(int round, StateId s) const;
  int round_of(std::size_t index) const;

  const Setting& setting() const { return setting_; }
  const StateSpace& space() const { return space_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Setting setting_;
  StateSpace space_;
  std::size_t round1_block_ = 0;   // keys per process id in round 1
  std::size_t later_block_ = 0;    // keys per process id in rounds >= 2
  std::size_t total_ = 0;
  std::vector<StateId> internal_outputs_;
  std::vector<StateId> decision_outputs_;
};

/// Every legal key of the setting in ascending index order.
std::vector<TransitionKey> enumerate_input_keys(const Setting& setting,
                                                const StateSpace& space);

/// Closed-form key count: x(x+1)^(n-1) + (r-1)k(k+1)^(n-1), times n with ids.
std::size_t input_key_count(const Setting& setting, const StateSpace& space);

/// Partial map from transition keys to outputs, stored densely.
class StateMachine {
 public:
  StateMachine() = default;
  StateMachine(std::string spec_name, const Setting& setting,
               const StateSpace& space);

  const std::string& spec_name() const { return spec_name_; }
  const Setting& setting() const { return indexer_.setting(); }
  const StateSpace& space() const { return indexer_.space(); }
  const KeyIndexer& indexer() const { return indexer_; }

  std::optional<StateId> get(const TransitionKey& key) const;
  /// Throws ConfigError for an illegal key or an out-of-range output.
  void set(const TransitionKey& key, StateId out);

  StateId at_index(std::size_t i) const { return table_[i]; }
  void set_index(std::size_t i, StateId out);
  void erase_index(std::size_t i) { table_[i] = kNoState; }

  std::size_t num_keys() const { return table_.size(); }
  std::size_t num_transitions() const;
  bool is_total() const;

  /// Defined transitions in ascending key order.
  std::vector<std::pair<TransitionKey, StateId>> transitions() const;

  friend bool operator==(const StateMachine& a, const StateMachine& b) {
    return a.spec_name_ == b.spec_name_ && a.setting() == b.setting() &&
           a.space() == b.space() && a.table_ == b.table_;
  }

 private:
  std::string spec_name_;
  KeyIndexer indexer_;
  std::vector<StateId> table_;
};

/// One crash: the process stops during `round`; its round message reaches
/// exactly `delivered_to` and nothing it would send later is received.
struct Crash {
  int proc = 0;
  int round = 1;
  std::vector<int> delivered_to;  // sorted, excludes proc

  friend auto operator<=>(const Crash&, const Crash&) = default;
  friend bool operator==(const Crash&, const Crash&) = default;
};

inline constexpr int kNeverCrashes = 1 << 20;

/// Adversary choice: initial states plus the crash pattern that induces the
/// lost-message set.
struct Scenario {
  std::vector<StateId> init;
  std::vector<Crash> crashes;  // sorted by proc

  /// Round in which `p` crashes, or kNeverCrashes.
  int crash_round(int p) const;
  /// Whether the round-`round` message from `sender` to `receiver` is lost.
  bool lost(int sender, int receiver, int round) const;
  /// True when at least one message between distinct processes is lost.
  bool any_loss(int n, int rounds) const;

  /// Throws ConfigError if the scenario does not fit the setting.
  void validate(const Setting& setting, const StateSpace& space) const;

  friend auto operator<=>(const Scenario&, const Scenario&) = default;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

}  // namespace protosynth
