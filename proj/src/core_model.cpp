#include "protosynth/core_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace protosynth {

std::string_view to_string(PropertySet p) {
  return p == PropertySet::consensus ? "consensus" : "atomic-commit";
}

PropertySet parse_property_set(std::string_view s) {
  if (s == "consensus") return PropertySet::consensus;
  if (s == "atomic-commit" || s == "atomic_commit") return PropertySet::atomic_commit;
  throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

ProtocolSpec ProtocolSpec::consensus() {
  return {"consensus", {"init:0", "init:1"}, {"decision:0", "decision:1"},
          PropertySet::consensus};
}

ProtocolSpec ProtocolSpec::atomic_commit() {
  return {"atomic-commit",
          {"init:abort", "init:commit"},
          {"decision:abort", "decision:commit"},
          PropertySet::atomic_commit};
}

ProtocolSpec ProtocolSpec::for_properties(PropertySet p) {
  return p == PropertySet::consensus ? consensus() : atomic_commit();
}

void ProtocolSpec::validate() const {
  if (initial_states.empty()) throw ConfigError("spec needs at least one initial state");
  if (decision_states.empty()) throw ConfigError("spec needs at least one decision state");
  std::set<std::string> seen;
  for (const auto* list : {&initial_states, &decision_states}) {
    for (const auto& l : *list) {
      if (!seen.insert(l).second) throw ConfigError("duplicate state label '" + l + "'");
    }
  }
  // Both property families pair init i with decision i.
  if (initial_states.size() != 2 || decision_states.size() != 2) {
    throw ConfigError("property sets are defined for two initial and two decision states");
  }
}

void Setting::validate() const {
  if (n < 2) throw ConfigError("n must be >= 2");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (f < 0 || f > n - 1) throw ConfigError("f must lie in [0, n-1]");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (n > 16) throw ConfigError("n > 16 is not supported");
}

StateSpace::StateSpace(std::vector<std::string> decision_labels, int k,
                       std::vector<std::string> initial_labels)
    : d_(static_cast<int>(decision_labels.size())),
      k_(k),
      x_(static_cast<int>(initial_labels.size())) {
  if (k < 1) throw ConfigError("k must be >= 1");
  labels_ = std::move(decision_labels);
  for (int i = 0; i < k; ++i) {
    std::string suffix;
    int v = i;
    do {
      suffix.insert(suffix.begin(), static_cast<char>('a' + v % 26));
      v = v / 26 - 1;
    } while (v >= 0);
    labels_.push_back("internal:" + suffix);
  }
  labels_.emplace_back(kLostLabel);
  for (auto& l : initial_labels) labels_.push_back(std::move(l));
}

StateKind StateSpace::kind(StateId s) const {
  if (is_decision(s)) return StateKind::decision;
  if (is_internal(s)) return StateKind::internal;
  if (is_lost(s)) return StateKind::lost;
  if (is_initial(s)) return StateKind::initial;
  throw ConfigError("state id " + std::to_string(s) + " out of range");
}

int StateSpace::local_index(StateId s) const {
  switch (kind(s)) {
    case StateKind::decision: return s;
    case StateKind::internal: return s - d_;
    case StateKind::lost: return 0;
    case StateKind::initial: return s - d_ - k_ - 1;
  }
  return 0;
}

const std::string& StateSpace::label(StateId s) const {
  if (!valid(s)) throw ConfigError("state id " + std::to_string(s) + " out of range");
  return labels_[static_cast<std::size_t>(s)];
}

StateId StateSpace::parse(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<StateId>(i);
  }
  throw ConfigError("unknown state label '" + std::string(label) + "'");
}

StateSpace encode_state_space(const ProtocolSpec& spec, int k) {
  spec.validate();
  return StateSpace(spec.decision_states, k, spec.initial_states);
}

int TransitionKey::lost_count(const StateSpace& space) const {
  return static_cast<int>(
      std::count_if(others.begin(), others.end(), [&](StateId s) { return space.is_lost(s); }));
}

std::string TransitionKey::to_string(const StateSpace& space) const {
  std::ostringstream os;
  os << "(" << round;
  if (proc_id) os << ", p" << *proc_id;
  os << ", " << space.label(own) << ", [";
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (i) os << ",";
    os << space.label(others[i]);
  }
  os << "])";
  return os.str();
}

namespace {

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

KeyIndexer::KeyIndexer(const Setting& setting, const StateSpace& space)
    : setting_(setting), space_(space) {
  const int x = space.num_initials();
  const int k = space.num_internals();
  const std::size_t ids = setting.use_proc_id ? static_cast<std::size_t>(setting.n) : 1;
  round1_block_ = static_cast<std::size_t>(x) * ipow(static_cast<std::size_t>(x + 1), setting.n - 1);
  later_block_ = static_cast<std::size_t>(k) * ipow(static_cast<std::size_t>(k + 1), setting.n - 1);
  total_ = ids * round1_block_ + ids * static_cast<std::size_t>(setting.rounds - 1) * later_block_;
  for (int i = 0; i < k; ++i) internal_outputs_.push_back(space.internal(i));
  for (int i = 0; i < space.num_decisions(); ++i) decision_outputs_.push_back(space.decision(i));
}

// Digits are assigned so that index order equals TransitionKey ordering:
// in round 1 lost (smallest id) is digit 0, in later rounds it is digit k.
std::size_t KeyIndexer::index(int round, int proc_id, StateId own,
                              std::span<const StateId> others) const {
  const int n = setting_.n;
  if (round < 1 || round > setting_.rounds) return npos;
  if (static_cast<int>(others.size()) != n - 1) return npos;
  const std::size_t ids = setting_.use_proc_id ? static_cast<std::size_t>(n) : 1;
  std::size_t pid = 0;
  if (setting_.use_proc_id) {
    if (proc_id < 0 || proc_id >= n) return npos;
    pid = static_cast<std::size_t>(proc_id);
  } else if (proc_id >= 0) {
    return npos;
  }

  std::size_t code = 0;
  if (round == 1) {
    if (!space_.is_initial(own)) return npos;
    const std::size_t base = static_cast<std::size_t>(space_.num_initials() + 1);
    code = static_cast<std::size_t>(space_.local_index(own));
    for (StateId o : others) {
      std::size_t digit;
      if (space_.is_lost(o)) digit = 0;
      else if (space_.is_initial(o)) digit = static_cast<std::size_t>(space_.local_index(o)) + 1;
      else return npos;
      code = code * base + digit;
    }
    return pid * round1_block_ + code;
  }
  if (!space_.is_internal(own)) return npos;
  const std::size_t base = static_cast<std::size_t>(space_.num_internals() + 1);
  code = static_cast<std::size_t>(space_.local_index(own));
  for (StateId o : others) {
    std::size_t digit;
    if (space_.is_internal(o)) digit = static_cast<std::size_t>(space_.local_index(o));
    else if (space_.is_lost(o)) digit = static_cast<std::size_t>(space_.num_internals());
    else return npos;
    code = code * base + digit;
  }
  return ids * round1_block_ +
         (static_cast<std::size_t>(round - 2) * ids + pid) * later_block_ + code;
}

std::size_t KeyIndexer::index(const TransitionKey& key) const {
  return index(key.round, key.proc_id ? *key.proc_id : -1, key.own, key.others);
}

int KeyIndexer::round_of(std::size_t i) const {
  const std::size_t ids = setting_.use_proc_id ? static_cast<std::size_t>(setting_.n) : 1;
  if (i < ids * round1_block_) return 1;
  return 2 + static_cast<int>((i - ids * round1_block_) / (ids * later_block_));
}

TransitionKey KeyIndexer::key(std::size_t i) const {
  if (i >= total_) throw ConfigError("key index out of range");
  const int n = setting_.n;
  const std::size_t ids = setting_.use_proc_id ? static_cast<std::size_t>(n) : 1;
  TransitionKey key;
  key.others.resize(static_cast<std::size_t>(n - 1));
  std::size_t code;
  std::size_t pid;
  if (i < ids * round1_block_) {
    key.round = 1;
    pid = i / round1_block_;
    code = i % round1_block_;
    const std::size_t base = static_cast<std::size_t>(space_.num_initials() + 1);
    for (int j = n - 2; j >= 0; --j) {
      const std::size_t digit = code % base;
      code /= base;
      key.others[static_cast<std::size_t>(j)] =
          digit == 0 ? space_.lost() : space_.initial(static_cast<int>(digit) - 1);
    }
    key.own = space_.initial(static_cast<int>(code));
  } else {
    const std::size_t rest = i - ids * round1_block_;
    const std::size_t block = rest / later_block_;
    key.round = 2 + static_cast<int>(block / ids);
    pid = block % ids;
    code = rest % later_block_;
    const std::size_t base = static_cast<std::size_t>(space_.num_internals() + 1);
    for (int j = n - 2; j >= 0; --j) {
      const std::size_t digit = code % base;
      code /= base;
      key.others[static_cast<std::size_t>(j)] =
          digit == static_cast<std::size_t>(space_.num_internals())
              ? space_.lost()
              : space_.internal(static_cast<int>(digit));
    }
    key.own = space_.internal(static_cast<int>(code));
  }
  if (setting_.use_proc_id) key.proc_id = static_cast<int>(pid);
  return key;
}

std::span<const StateId> KeyIndexer::legal_outputs(int round) const {
  if (round == setting_.rounds) return decision_outputs_;
  return internal_outputs_;
}

bool KeyIndexer::is_legal_output(int round, StateId s) const {
  return round == setting_.rounds ? space_.is_decision(s) : space_.is_internal(s);
}

std::vector<TransitionKey> enumerate_input_keys(const Setting& setting,
                                                const StateSpace& space) {
  KeyIndexer indexer(setting, space);
  std::vector<TransitionKey> keys;
  keys.reserve(indexer.size());
  for (std::size_t i = 0; i < indexer.size(); ++i) keys.push_back(indexer.key(i));
  return keys;
}

std::size_t input_key_count(const Setting& setting, const StateSpace& space) {
  const auto x = static_cast<std::size_t>(space.num_initials());
  const auto k = static_cast<std::size_t>(space.num_internals());
  const std::size_t per_id = x * ipow(x + 1, setting.n - 1) +
                             static_cast<std::size_t>(setting.rounds - 1) * k * ipow(k + 1, setting.n - 1);
  return setting.use_proc_id ? per_id * static_cast<std::size_t>(setting.n) : per_id;
}

StateMachine::StateMachine(std::string spec_name, const Setting& setting,
                           const StateSpace& space)
    : spec_name_(std::move(spec_name)), indexer_(setting, space),
      table_(indexer_.size(), kNoState) {}

std::optional<StateId> StateMachine::get(const TransitionKey& key) const {
  const auto i = indexer_.index(key);
  if (i == KeyIndexer::npos || table_[i] == kNoState) return std::nullopt;
  return table_[i];
}

void StateMachine::set(const TransitionKey& key, StateId out) {
  const auto i = indexer_.index(key);
  if (i == KeyIndexer::npos) throw ConfigError("illegal transition key " + key.to_string(space()));
  if (!indexer_.is_legal_output(key.round, out)) {
    throw ConfigError("illegal output for round " + std::to_string(key.round));
  }
  table_[i] = out;
}

void StateMachine::set_index(std::size_t i, StateId out) {
  if (!indexer_.is_legal_output(indexer_.round_of(i), out)) {
    throw ConfigError("illegal output for key index " + std::to_string(i));
  }
  table_[i] = out;
}

std::size_t StateMachine::num_transitions() const {
  return static_cast<std::size_t>(
      std::count_if(table_.begin(), table_.end(), [](StateId s) { return s != kNoState; }));
}

bool StateMachine::is_total() const { return num_transitions() == table_.size(); }

std::vector<std::pair<TransitionKey, StateId>> StateMachine::transitions() const {
  std::vector<std::pair<TransitionKey, StateId>> out;
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (table_[i] != kNoState) out.emplace_back(indexer_.key(i), table_[i]);
  }
  return out;
}

int Scenario::crash_round(int p) const {
  for (const auto& c : crashes) {
    if (c.proc == p) return c.round;
  }
  return kNeverCrashes;
}

bool Scenario::lost(int sender, int receiver, int round) const {
  if (sender == receiver) return false;
  for (const auto& c : crashes) {
    if (c.proc != sender) continue;
    if (round < c.round) return false;
    if (round > c.round) return true;
    return !std::binary_search(c.delivered_to.begin(), c.delivered_to.end(), receiver);
  }
  return false;
}

bool Scenario::any_loss(int n, int rounds) const {
  for (const auto& c : crashes) {
    if (c.round < rounds) return true;
    if (static_cast<int>(c.delivered_to.size()) < n - 1) return true;
  }
  return false;
}

void Scenario::validate(const Setting& setting, const StateSpace& space) const {
  if (static_cast<int>(init.size()) != setting.n) throw ConfigError("scenario init has wrong length");
  for (StateId s : init) {
    if (!space.is_initial(s)) throw ConfigError("scenario init holds a non-initial state");
  }
  if (static_cast<int>(crashes.size()) > setting.f) throw ConfigError("scenario exceeds the crash budget");
  std::set<int> procs;
  for (const auto& c : crashes) {
    if (c.proc < 0 || c.proc >= setting.n) throw ConfigError("crash process out of range");
    if (!procs.insert(c.proc).second) throw ConfigError("process crashes twice");
    if (c.round < 1 || c.round > setting.rounds) throw ConfigError("crash round out of range");
    if (!std::is_sorted(c.delivered_to.begin(), c.delivered_to.end()) ||
        std::adjacent_find(c.delivered_to.begin(), c.delivered_to.end()) != c.delivered_to.end()) {
      throw ConfigError("delivered_to must be sorted and unique");
    }
    for (int q : c.delivered_to) {
      if (q < 0 || q >= setting.n || q == c.proc) throw ConfigError("bad delivered_to entry");
    }
  }
  if (!std::is_sorted(crashes.begin(), crashes.end(),
                      [](const Crash& a, const Crash& b) { return a.proc < b.proc; })) {
    throw ConfigError("crashes must be sorted by process");
  }
}

}  // namespace protosynth
