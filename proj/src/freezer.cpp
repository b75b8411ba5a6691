#include "protosynth/freezer.hpp"

#include <algorithm>

#include "protosynth/properties.hpp"
#include "protosynth/search.hpp"

namespace protosynth {

void FreezeList::push(FreezeEntry entry) {
  if (entry.key_index >= pos_.size()) throw ConfigError("freeze key out of range");
  if (pos_[entry.key_index] >= 0) throw ConfigError("key is already frozen");
  pos_[entry.key_index] = static_cast<int>(stack_.size());
  stack_.push_back(std::move(entry));
}

FreezeEntry FreezeList::remove(std::size_t key_index) {
  const int p = pos_[key_index];
  if (p < 0) throw ConfigError("key is not frozen");
  FreezeEntry e = std::move(stack_[static_cast<std::size_t>(p)]);
  stack_.erase(stack_.begin() + p);
  pos_[key_index] = -1;
  for (std::size_t i = static_cast<std::size_t>(p); i < stack_.size(); ++i) {
    pos_[stack_[i].key_index] = static_cast<int>(i);
  }
  return e;
}

std::vector<StateId> FreezeList::table() const {
  std::vector<StateId> t(pos_.size(), kNoState);
  for (const auto& e : stack_) t[e.key_index] = e.current;
  return t;
}

std::string_view to_string(FreezeEvent::Action a) {
  switch (a) {
    case FreezeEvent::Action::freeze: return "freeze";
    case FreezeEvent::Action::refreeze: return "refreeze";
    case FreezeEvent::Action::discard: return "discard";
  }
  return "?";
}

FreezeList group_freeze(const ProtocolSpec& spec, const Setting& setting, const StateSpace& space) {
  const KeyIndexer indexer(setting, space);
  const auto n = static_cast<std::size_t>(setting.n);
  for (int i = 0; i < space.num_initials(); ++i) {
    const std::vector<StateId> init(n, space.initial(i));
    const auto forced = definite_decision(spec, space, init, false);
    if (!forced) continue;

    FreezeList list(indexer.size());
    StateId state = space.initial(i);
    for (int t = 1; t <= setting.rounds; ++t) {
      const StateId out = t == setting.rounds ? *forced : space.internal(0);
      const std::vector<StateId> others(n - 1, state);
      const int ids = setting.use_proc_id ? setting.n : 1;
      for (int p = 0; p < ids; ++p) {
        FreezeEntry e;
        e.key_index = indexer.index(t, setting.use_proc_id ? p : -1, state, others);
        e.key = indexer.key(e.key_index);
        e.current = out;
        e.tried = {out};
        e.origin = FreezeOrigin::group;
        list.push(std::move(e));
      }
      state = out;
    }
    return list;
  }
  throw NoDefiniteScenario("no uniform loss-free initial vector has a forced decision");
}

bool is_ambiguous(std::span<const double> dist, const AmbiguityRule& rule) {
  std::vector<double> high;
  for (double p : dist) {
    if (p >= rule.min_prob) high.push_back(p);
  }
  std::sort(high.begin(), high.end());
  for (std::size_t i = 1; i < high.size(); ++i) {
    if (high[i] - high[i - 1] <= rule.max_diff) return true;
  }
  return false;
}

std::optional<FreezeEvent> determine_freezing(const TrainingBuffer& buffer, FreezeList& list,
                                              const KeyIndexer& indexer, int episodes_since_add,
                                              const AmbiguityRule& rule) {
  if (episodes_since_add < rule.interval) return std::nullopt;
  const auto latest = buffer.latest_by_key(indexer.size());
  const StateSpace& space = indexer.space();

  struct Candidate {
    int round;
    int lost;
    std::size_t key_index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t k = 0; k < latest.size(); ++k) {
    if (latest[k] == nullptr || list.contains(k)) continue;
    if (!is_ambiguous(*latest[k], rule)) continue;
    candidates.push_back({indexer.round_of(k), indexer.key(k).lost_count(space), k});
  }
  if (candidates.empty()) return std::nullopt;
  const auto best = std::min_element(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.round != b.round) return a.round > b.round;
    if (a.lost != b.lost) return a.lost < b.lost;
    return a.key_index < b.key_index;
  });

  const Distribution& dist = *latest[best->key_index];
  const StateId out = argmax_output(dist, indexer.legal_outputs(best->round));
  FreezeEntry e;
  e.key_index = best->key_index;
  e.key = indexer.key(best->key_index);
  e.current = out;
  e.tried = {out};
  e.origin = FreezeOrigin::ambiguity;
  list.push(std::move(e));
  return FreezeEvent{FreezeEvent::Action::freeze, best->key_index, out};
}

namespace {

class CompletionSearch {
 public:
  CompletionSearch(SearchContext& ctx, const Scenario& scenario, int bound)
      : ctx_(ctx), scenario_(scenario), bound_(bound) {}

  bool solve(const ProtocolConfig& config, int open) {
    if (config.done(ctx_.setting())) return ctx_.terminal_reward(config) > 0;
    RoundState rs;
    rs.config = config;
    ctx_.apply_losses(rs.config, scenario_loss_choice(scenario_, config.round), rs.key_of_proc);
    SearchContext::distinct_keys(rs.key_of_proc, rs.keys);
    rs.outputs.assign(rs.keys.size(), kNoState);
    return assign(rs, 0, open);
  }

 private:
  struct RoundState {
    ProtocolConfig config;
    std::vector<std::size_t> key_of_proc;
    std::vector<std::size_t> keys;
    std::vector<StateId> outputs;
  };

  bool assign(RoundState& rs, std::size_t i, int open) {
    if (i == rs.keys.size()) {
      ProtocolConfig next = rs.config;
      ctx_.apply_outputs(next, rs.key_of_proc, rs.keys, rs.outputs);
      return solve(next, open);
    }
    const StateId pinned = ctx_.frozen(rs.keys[i]);
    if (pinned != kNoState) {
      rs.outputs[i] = pinned;
      return assign(rs, i + 1, open);
    }
    if (open + 1 > bound_) throw TooLarge("too many free keys for the completion oracle");
    for (StateId s : ctx_.indexer().legal_outputs(rs.config.round)) {
      rs.outputs[i] = s;
      if (assign(rs, i + 1, open + 1)) return true;
    }
    return false;
  }

  SearchContext& ctx_;
  const Scenario& scenario_;
  int bound_;
};

}  // namespace

bool scenario_solvable(const FreezeList& list, const Scenario& scenario, const ProtocolSpec& spec,
                       const Setting& setting, const StateSpace& space, int bound) {
  SearchContext ctx(spec, setting, space, Phase::final_phase(setting), SearchOptions{});
  if (list.num_keys() > 0) ctx.set_frozen(list.table());
  CompletionSearch search(ctx, scenario, bound);
  return search.solve(ProtocolConfig::initial(scenario), 0);
}

std::vector<FreezeEvent> determine_unfreeze(int reward, std::span<const std::size_t> activated,
                                            FreezeList& list, const KeyIndexer& indexer,
                                            const UnfreezeQuery& query) {
  std::vector<FreezeEvent> events;
  if (reward >= 0) return events;
  auto is_activated = [&](std::size_t k) {
    return std::find(activated.begin(), activated.end(), k) != activated.end();
  };
  bool any = false;
  for (std::size_t k : activated) any = any || list.contains(k);
  if (!any) return events;

  if (query.oracle_enabled) {
    bool solvable = false;
    try {
      solvable = scenario_solvable(list, *query.scenario, *query.spec, *query.setting, *query.space, query.bound);
    } catch (const TooLarge&) {
      solvable = false;  // fall back to the reward alone
    }
    if (solvable) return events;
  }

  while (true) {
    // Topmost entry that the failed run went through.
    const FreezeEntry* top = nullptr;
    for (auto it = list.entries().rbegin(); it != list.entries().rend(); ++it) {
      if (is_activated(it->key_index)) {
        top = &*it;
        break;
      }
    }
    if (top == nullptr) break;
    FreezeEntry e = list.remove(top->key_index);
    StateId next = kNoState;
    for (StateId s : indexer.legal_outputs(e.key.round)) {
      if (!std::binary_search(e.tried.begin(), e.tried.end(), s)) {
        next = s;
        break;
      }
    }
    if (next == kNoState) {
      events.push_back({FreezeEvent::Action::discard, e.key_index, e.current});
      continue;
    }
    e.current = next;
    e.tried.insert(std::upper_bound(e.tried.begin(), e.tried.end(), next), next);
    events.push_back({FreezeEvent::Action::refreeze, e.key_index, next});
    list.push(std::move(e));
    break;
  }
  return events;
}

}  // namespace protosynth
