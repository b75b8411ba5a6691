#pragma once

#include <cstdint>
#include <map>
#include <tuple>
#include <span>
#include <vector>

#include "protosynth/core_model.hpp"
#include "protosynth/policy.hpp"
#include "protosynth/scenario_gen.hpp"

namespace protosynth {

/// Exploitation plus exploration: q + c_puct * p * sqrt(n_sum) / (1 + n_sa).
double ucb_score(double q, double p, double n_sa, double n_sum, double c_puct);

/// The adversary's move for one round: which alive processes crash now and,
/// for each, the set of receivers of its last message (bit per process).
struct LossChoice {
  std::uint32_t crash_mask = 0;
  std::vector<std::uint32_t> delivered;  // one mask per crashing process, ascending

  friend bool operator==(const LossChoice&, const LossChoice&) = default;
};

/// Crashes the scenario schedules for `round`.
LossChoice scenario_loss_choice(const Scenario& scenario, int round);

/// Execution state at the start of a round.
struct ProtocolConfig {
  int round = 1;                  // next round to run; > rounds means finished
  std::vector<StateId> init;
  std::vector<StateId> state;
  std::vector<int> crash_round;   // kNeverCrashes while alive
  int crashes_used = 0;
  bool any_loss = false;

  static ProtocolConfig initial(const Scenario& scenario);
  bool done(const Setting& s) const { return round > s.rounds; }
};

struct SearchOptions {
  double c_puct = 1.5;
  int budget = 0;              // iterations per simulate; 0 means rounds * n * 1000
  bool argmax_select = false;  // outer-loop selection; otherwise sample by visits

  int effective_budget(const Setting& s) const { return budget > 0 ? budget : s.rounds * s.n * 1000; }
};

/// Read-only inputs shared by every search of an episode: spec, priors of the
/// current model, frozen outputs by key index, the phase, and a cache of the
/// adversary's move lists.
class SearchContext {
 public:
  SearchContext(const ProtocolSpec& spec, const Setting& setting, const StateSpace& space,
                Phase phase, SearchOptions options);

  /// Row-major [keys x alphabet] priors, e.g. PolicyModel::predict_all().
  void set_priors(std::vector<double> priors) { priors_ = std::move(priors); }
  /// Frozen output per key index, kNoState where unfrozen.
  void set_frozen(std::vector<StateId> frozen) { frozen_ = std::move(frozen); }
  void set_phase(Phase phase) { phase_ = phase; }

  const ProtocolSpec& spec() const { return spec_; }
  const Setting& setting() const { return setting_; }
  const StateSpace& space() const { return space_; }
  const KeyIndexer& indexer() const { return indexer_; }
  Phase phase() const { return phase_; }
  const SearchOptions& options() const { return options_; }

  double prior(std::size_t key_index, StateId out) const;
  StateId frozen(std::size_t key_index) const {
    return frozen_.empty() ? kNoState : frozen_[key_index];
  }

  /// Phase-legal adversary moves for a round given who is still alive.
  const std::vector<LossChoice>& loss_choices(int round, std::uint32_t alive_mask, int budget);

  /// Applies the round's losses: marks crashes, returns for each computing
  /// process its key index (npos for processes that do not compute).
  void apply_losses(ProtocolConfig& config, const LossChoice& loss,
                    std::vector<std::size_t>& key_of_proc) const;
  /// Distinct key indices of a round in ascending order.
  static void distinct_keys(const std::vector<std::size_t>& key_of_proc,
                            std::vector<std::size_t>& keys);
  /// Adopts outputs and advances to the next round.
  void apply_outputs(ProtocolConfig& config, const std::vector<std::size_t>& key_of_proc,
                     const std::vector<std::size_t>& keys, const std::vector<StateId>& outputs) const;
  /// +1 / -1 for a finished configuration.
  int terminal_reward(const ProtocolConfig& config) const;

 private:
  ProtocolSpec spec_;
  Setting setting_;
  StateSpace space_;
  KeyIndexer indexer_;
  Phase phase_;
  SearchOptions options_;
  std::vector<double> priors_;
  std::vector<StateId> frozen_;
  std::map<std::tuple<int, std::uint32_t, int>, std::vector<LossChoice>> loss_cache_;
};

/// Alternating adversary / protocol tree. Protocol nodes decide one distinct
/// input key each, in ascending key order within a round; adversary nodes pick
/// the next round's losses. Edge values accumulate the reward from the
/// perspective of the player owning the edge.
struct SearchTree {
  enum class Kind : std::uint8_t { adversary, protocol };

  struct Edge {
    int move = 0;         // LossChoice index or output state id
    double prior = 0.0;
    int visits = 0;
    double value = 0.0;   // accumulated
    int child = -1;

    double mean() const { return visits > 0 ? value / visits : 0.0; }
  };

  struct Node {
    Kind kind = Kind::protocol;
    int first_edge = 0;
    int num_edges = 0;
    int visits = 0;
    std::size_t key_index = 0;  // protocol nodes
    int round = 0;
  };

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  // Move list behind each adversary node (owned by the SearchContext cache);
  // null for protocol nodes and for the root, whose only move is fixed.
  std::vector<const std::vector<LossChoice>*> node_moves;

  std::span<Edge> edges_of(int node) {
    return {edges.data() + nodes[static_cast<std::size_t>(node)].first_edge,
            static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].num_edges)};
  }
  std::span<const Edge> edges_of(int node) const {
    return {edges.data() + nodes[static_cast<std::size_t>(node)].first_edge,
            static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].num_edges)};
  }
};

/// Visit distribution of one distinct key at the searched round, plus the
/// output chosen for it.
struct KeyDecision {
  std::size_t key_index = 0;
  Distribution visits;
  StateId chosen = kNoState;
  bool frozen = false;
};

struct RoundDecision {
  std::vector<KeyDecision> keys;
  SearchTree tree;
};

/// Runs `budget` select/expand/evaluate/backup iterations from `config`,
/// whose own round is fixed to `root_loss`; later rounds are chosen by the
/// adversary. Then walks the decided keys of the root round, choosing outputs
/// by visit-proportional sampling (or argmax when `rng` is null or the
/// context asks for argmax).
RoundDecision simulate(SearchContext& ctx, const ProtocolConfig& config, const LossChoice& root_loss,
                       int budget, Rng* rng);

struct MctsResult {
  std::vector<TrainingPair> pairs;
  int reward = -1;
  std::vector<std::size_t> activated;  // frozen key indices on the applied path
};

/// Plays the scenario round by round, searching before each round and
/// recording one training pair per distinct key.
MctsResult run_mcts(SearchContext& ctx, const Scenario& scenario, Rng& rng);

}  // namespace protosynth
