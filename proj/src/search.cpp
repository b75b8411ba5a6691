#include "protosynth/search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "protosynth/properties.hpp"

namespace protosynth {

double ucb_score(double q, double p, double n_sa, double n_sum, double c_puct) {
  return q + c_puct * p * std::sqrt(n_sum) / (1.0 + n_sa);
}

LossChoice scenario_loss_choice(const Scenario& scenario, int round) {
  LossChoice lc;
  std::vector<const Crash*> now;
  for (const auto& c : scenario.crashes) {
    if (c.round == round) now.push_back(&c);
  }
  std::sort(now.begin(), now.end(), [](const Crash* a, const Crash* b) { return a->proc < b->proc; });
  for (const Crash* c : now) {
    lc.crash_mask |= 1u << c->proc;
    std::uint32_t m = 0;
    for (int q : c->delivered_to) m |= 1u << q;
    lc.delivered.push_back(m);
  }
  return lc;
}

ProtocolConfig ProtocolConfig::initial(const Scenario& scenario) {
  ProtocolConfig c;
  c.init = scenario.init;
  c.state = scenario.init;
  c.crash_round.assign(scenario.init.size(), kNeverCrashes);
  return c;
}

SearchContext::SearchContext(const ProtocolSpec& spec, const Setting& setting, const StateSpace& space,
                             Phase phase, SearchOptions options)
    : spec_(spec),
      setting_(setting),
      space_(space),
      indexer_(setting, space),
      phase_(phase),
      options_(options) {}

double SearchContext::prior(std::size_t key_index, StateId out) const {
  if (priors_.empty()) {
    const auto legal = indexer_.legal_outputs(indexer_.round_of(key_index));
    return 1.0 / static_cast<double>(legal.size());
  }
  return priors_[key_index * static_cast<std::size_t>(space_.size()) + static_cast<std::size_t>(out)];
}

const std::vector<LossChoice>& SearchContext::loss_choices(int round, std::uint32_t alive_mask, int budget) {
  if (round < phase_.first_crash_round(setting_)) budget = 0;
  const auto key = std::make_tuple(round, alive_mask, budget);
  if (auto it = loss_cache_.find(key); it != loss_cache_.end()) return it->second;

  std::vector<LossChoice> out;
  out.push_back(LossChoice{});
  const std::uint32_t all = (1u << setting_.n) - 1u;
  for (std::uint32_t s = 1; s <= alive_mask; ++s) {
    if ((s & ~alive_mask) != 0 || std::popcount(s) > budget) continue;
    std::vector<int> procs;
    for (int p = 0; p < setting_.n; ++p) {
      if (s >> p & 1u) procs.push_back(p);
    }
    // Mixed-radix walk over one delivery subset per crashing process.
    std::vector<std::uint32_t> digit(procs.size(), 0);
    const std::uint32_t radix = 1u << (setting_.n - 1);
    while (true) {
      LossChoice lc;
      lc.crash_mask = s;
      for (std::size_t i = 0; i < procs.size(); ++i) {
        const int p = procs[i];
        // Spread the (n-1)-bit digit over the processes other than p.
        std::uint32_t m = 0;
        int bit = 0;
        for (int q = 0; q < setting_.n; ++q) {
          if (q == p) continue;
          if (digit[i] >> bit & 1u) m |= 1u << q;
          ++bit;
        }
        lc.delivered.push_back(m & all);
      }
      out.push_back(std::move(lc));
      std::size_t i = procs.size();
      while (i > 0 && ++digit[i - 1] == radix) digit[--i] = 0;
      if (i == 0) break;
    }
  }
  return loss_cache_.emplace(key, std::move(out)).first->second;
}

void SearchContext::apply_losses(ProtocolConfig& config, const LossChoice& loss,
                                 std::vector<std::size_t>& key_of_proc) const {
  const int n = setting_.n;
  const int t = config.round;
  std::array<std::uint32_t, kMaxProcesses> delivered{};
  std::size_t j = 0;
  for (int p = 0; p < n; ++p) {
    if (!(loss.crash_mask >> p & 1u)) continue;
    const auto up = static_cast<std::size_t>(p);
    config.crash_round[up] = t;
    ++config.crashes_used;
    delivered[up] = loss.delivered[j++];
    const std::uint32_t others = ((1u << n) - 1u) & ~(1u << p);
    if (t < setting_.rounds || delivered[up] != others) config.any_loss = true;
  }

  key_of_proc.assign(static_cast<std::size_t>(n), KeyIndexer::npos);
  std::array<StateId, kMaxProcesses> others{};
  const StateId lost = space_.lost();
  for (int p = 0; p < n; ++p) {
    const auto up = static_cast<std::size_t>(p);
    if (config.crash_round[up] <= t) continue;
    std::size_t m = 0;
    for (int q = 0; q < n; ++q) {
      if (q == p) continue;
      const auto uq = static_cast<std::size_t>(q);
      const int cr = config.crash_round[uq];
      const bool arrives = cr > t || (cr == t && (delivered[uq] >> p & 1u));
      others[m++] = arrives ? config.state[uq] : lost;
    }
    key_of_proc[up] = indexer_.index(t, setting_.use_proc_id ? p : -1, config.state[up],
                                     std::span<const StateId>(others.data(), m));
  }
}

void SearchContext::distinct_keys(const std::vector<std::size_t>& key_of_proc,
                                  std::vector<std::size_t>& keys) {
  keys.clear();
  for (std::size_t k : key_of_proc) {
    if (k != KeyIndexer::npos) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
}

void SearchContext::apply_outputs(ProtocolConfig& config, const std::vector<std::size_t>& key_of_proc,
                                  const std::vector<std::size_t>& keys,
                                  const std::vector<StateId>& outputs) const {
  for (std::size_t p = 0; p < key_of_proc.size(); ++p) {
    const std::size_t k = key_of_proc[p];
    if (k == KeyIndexer::npos) continue;
    const auto pos = static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), k) - keys.begin());
    config.state[p] = outputs[pos];
  }
  ++config.round;
}

int SearchContext::terminal_reward(const ProtocolConfig& config) const {
  std::array<StateId, kMaxProcesses> decisions{};
  std::uint32_t alive = 0;
  const auto n = static_cast<std::size_t>(setting_.n);
  for (std::size_t p = 0; p < n; ++p) {
    decisions[p] = kNoState;
    if (config.crash_round[p] != kNeverCrashes) continue;
    alive |= 1u << p;
    if (space_.is_decision(config.state[p])) decisions[p] = config.state[p];
  }
  const bool ok = outcome_ok(spec_.properties, space_, config.init, config.any_loss,
                             std::span<const StateId>(decisions.data(), n), alive);
  return ok ? 1 : -1;
}

namespace {

std::uint32_t uncrashed_mask(const ProtocolConfig& c) {
  std::uint32_t m = 0;
  for (std::size_t p = 0; p < c.crash_round.size(); ++p) {
    if (c.crash_round[p] == kNeverCrashes) m |= 1u << p;
  }
  return m;
}

int select_edge(std::span<const SearchTree::Edge> edges, int node_visits, double c_puct) {
  int best = 0;
  double best_score = -1e300;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    const double s = ucb_score(e.mean(), e.prior, e.visits, node_visits, c_puct);
    const auto& b = edges[static_cast<std::size_t>(best)];
    if (s > best_score || (s == best_score && e.prior > b.prior)) {
      best = static_cast<int>(i);
      best_score = s;
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(SearchContext& ctx, SearchTree& tree) : ctx_(ctx), tree_(tree) {}

  int add_adversary(int round, const std::vector<LossChoice>* moves, std::size_t count) {
    SearchTree::Node node;
    node.kind = SearchTree::Kind::adversary;
    node.round = round;
    node.first_edge = static_cast<int>(tree_.edges.size());
    node.num_edges = static_cast<int>(count);
    const double prior = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      SearchTree::Edge e;
      e.move = static_cast<int>(i);
      e.prior = prior;
      tree_.edges.push_back(e);
    }
    tree_.nodes.push_back(node);
    tree_.node_moves.push_back(moves);
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  int add_protocol(int round, std::size_t key_index) {
    SearchTree::Node node;
    node.kind = SearchTree::Kind::protocol;
    node.round = round;
    node.key_index = key_index;
    node.first_edge = static_cast<int>(tree_.edges.size());
    const StateId frozen = ctx_.frozen(key_index);
    if (frozen != kNoState) {
      SearchTree::Edge e;
      e.move = frozen;
      e.prior = 1.0;
      tree_.edges.push_back(e);
      node.num_edges = 1;
    } else {
      const auto legal = ctx_.indexer().legal_outputs(round);
      for (StateId s : legal) {
        SearchTree::Edge e;
        e.move = s;
        e.prior = ctx_.prior(key_index, s);
        tree_.edges.push_back(e);
      }
      node.num_edges = static_cast<int>(legal.size());
    }
    tree_.nodes.push_back(node);
    tree_.node_moves.push_back(nullptr);
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

 private:
  SearchContext& ctx_;
  SearchTree& tree_;
};

struct Step {
  int node;
  int edge;  // absolute edge index
};

}  // namespace

RoundDecision simulate(SearchContext& ctx, const ProtocolConfig& config, const LossChoice& root_loss,
                       int budget, Rng* rng) {
  RoundDecision result;
  SearchTree& tree = result.tree;
  TreeBuilder builder(ctx, tree);
  const Setting& setting = ctx.setting();
  const double c_puct = ctx.options().c_puct;
  budget = std::max(budget, 1);

  builder.add_adversary(config.round, nullptr, 1);

  ProtocolConfig work;
  std::vector<std::size_t> key_of_proc;
  std::vector<std::size_t> keys;
  std::vector<StateId> outputs;
  std::vector<Step> path;

  for (int it = 0; it < budget; ++it) {
    work = config;
    path.clear();
    int node = 0;
    int reward = 0;
    std::size_t key_pos = 0;
    while (true) {
      const auto un = static_cast<std::size_t>(node);
      const SearchTree::Node nd = tree.nodes[un];
      const int local = nd.num_edges == 1
                            ? 0
                            : select_edge(tree.edges_of(node), nd.visits, c_puct);
      const int edge_index = nd.first_edge + local;
      path.push_back({node, edge_index});
      const int move = tree.edges[static_cast<std::size_t>(edge_index)].move;

      bool finished = false;
      if (nd.kind == SearchTree::Kind::adversary) {
        const LossChoice& loss = node == 0 ? root_loss : (*tree.node_moves[un])[static_cast<std::size_t>(move)];
        ctx.apply_losses(work, loss, key_of_proc);
        SearchContext::distinct_keys(key_of_proc, keys);
        outputs.assign(keys.size(), kNoState);
        key_pos = 0;
      } else {
        outputs[key_pos++] = static_cast<StateId>(move);
        if (key_pos == keys.size()) {
          ctx.apply_outputs(work, key_of_proc, keys, outputs);
          if (work.done(setting)) {
            reward = ctx.terminal_reward(work);
            finished = true;
          }
        }
      }
      if (finished) break;

      int child = tree.edges[static_cast<std::size_t>(edge_index)].child;
      if (child < 0) {
        if (nd.kind == SearchTree::Kind::adversary || key_pos < keys.size()) {
          child = builder.add_protocol(work.round, keys[key_pos]);
        } else {
          const auto& moves = ctx.loss_choices(work.round, uncrashed_mask(work), setting.f - work.crashes_used);
          child = builder.add_adversary(work.round, &moves, moves.size());
        }
        // Edges may have been reallocated by the insertion.
        tree.edges[static_cast<std::size_t>(edge_index)].child = child;
      }
      node = child;
    }

    for (const Step& s : path) {
      auto& e = tree.edges[static_cast<std::size_t>(s.edge)];
      auto& nd = tree.nodes[static_cast<std::size_t>(s.node)];
      ++e.visits;
      e.value += nd.kind == SearchTree::Kind::protocol ? reward : -reward;
      ++nd.visits;
    }
  }

  // Read the decisions of the root round off the most visited path.
  const bool argmax = rng == nullptr || ctx.options().argmax_select;
  const auto alphabet = static_cast<std::size_t>(ctx.space().size());
  int node = tree.edges[static_cast<std::size_t>(tree.nodes[0].first_edge)].child;
  while (node >= 0 && tree.nodes[static_cast<std::size_t>(node)].kind == SearchTree::Kind::protocol &&
         tree.nodes[static_cast<std::size_t>(node)].round == config.round) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    const auto edges = tree.edges_of(node);
    KeyDecision kd;
    kd.key_index = nd.key_index;
    kd.frozen = ctx.frozen(nd.key_index) != kNoState;
    kd.visits.assign(alphabet, 0.0);
    double total = 0.0;
    for (const auto& e : edges) total += e.visits;
    for (const auto& e : edges) kd.visits[static_cast<std::size_t>(e.move)] = total > 0 ? e.visits / total : 0.0;

    std::size_t pick = 0;
    if (argmax) {
      for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i].visits > edges[pick].visits) pick = i;
      }
    } else {
      std::vector<double> w;
      for (const auto& e : edges) w.push_back(e.visits);
      std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
      pick = dist(*rng);
    }
    kd.chosen = static_cast<StateId>(edges[pick].move);
    result.keys.push_back(std::move(kd));
    node = edges[pick].child;
  }
  return result;
}

MctsResult run_mcts(SearchContext& ctx, const Scenario& scenario, Rng& rng) {
  MctsResult res;
  const Setting& setting = ctx.setting();
  const int budget = ctx.options().effective_budget(setting);
  ProtocolConfig config = ProtocolConfig::initial(scenario);
  std::vector<std::size_t> key_of_proc;
  std::vector<std::size_t> keys;
  std::vector<StateId> outputs;

  for (int t = 1; t <= setting.rounds; ++t) {
    const LossChoice loss = scenario_loss_choice(scenario, t);
    RoundDecision dec = simulate(ctx, config, loss, budget, &rng);
    ctx.apply_losses(config, loss, key_of_proc);
    SearchContext::distinct_keys(key_of_proc, keys);
    outputs.assign(keys.size(), kNoState);
    if (dec.keys.size() != keys.size()) throw std::logic_error("search did not decide every key of the round");
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const KeyDecision& kd = dec.keys[i];
      outputs[i] = kd.chosen;
      if (kd.frozen) {
        Distribution point(kd.visits.size(), 0.0);
        point[static_cast<std::size_t>(kd.chosen)] = 1.0;
        res.pairs.push_back({kd.key_index, std::move(point)});
        res.activated.push_back(kd.key_index);
      } else {
        res.pairs.push_back({kd.key_index, kd.visits});
      }
    }
    ctx.apply_outputs(config, key_of_proc, keys, outputs);
  }
  res.reward = ctx.terminal_reward(config);
  return res;
}

}  // namespace protosynth
