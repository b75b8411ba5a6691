#include "protosynth/simulator.hpp"

#include <algorithm>
#include <sstream>

namespace protosynth {

namespace {

struct LossTable {
  std::array<int, kMaxProcesses> crash_round{};
  std::array<std::uint32_t, kMaxProcesses> delivered{};  // mask for the crash round

  LossTable(const Scenario& sc, int n) {
    crash_round.fill(kNeverCrashes);
    for (const auto& c : sc.crashes) {
      crash_round[static_cast<std::size_t>(c.proc)] = c.round;
      std::uint32_t m = 0;
      for (int q : c.delivered_to) m |= 1u << q;
      delivered[static_cast<std::size_t>(c.proc)] = m;
    }
    (void)n;
  }

  bool lost(int sender, int receiver, int round) const {
    const int cr = crash_round[static_cast<std::size_t>(sender)];
    if (round < cr) return false;
    if (round > cr) return true;
    return (delivered[static_cast<std::size_t>(sender)] & (1u << receiver)) == 0;
  }
};

void check_fits(const StateMachine& machine, const Scenario& scenario) {
  if (machine.setting().n > kMaxProcesses) throw ConfigError("too many processes");
  scenario.validate(machine.setting(), machine.space());
}

}  // namespace

ExecutionTrace run(const StateMachine& machine, const Scenario& scenario) {
  check_fits(machine, scenario);
  const auto& setting = machine.setting();
  const auto& space = machine.space();
  const int n = setting.n;
  const int r = setting.rounds;
  const LossTable loss(scenario, n);
  const auto un = static_cast<std::size_t>(n);

  ExecutionTrace tr;
  tr.n = n;
  tr.rounds = r;
  tr.any_loss = scenario.any_loss(n, r);
  tr.final_alive.assign(un, false);
  tr.decisions.assign(un, kNoState);
  for (int p = 0; p < n; ++p) tr.final_alive[static_cast<std::size_t>(p)] = scenario.crash_round(p) == kNeverCrashes;

  std::vector<StateId> state(scenario.init.begin(), scenario.init.end());
  std::vector<bool> halted(un, false);  // hit a missing transition

  std::vector<StateId> others(un - 1);
  for (int t = 1; t <= r; ++t) {
    std::vector<StateId> sent(un, kNoState);
    std::vector<bool> alive(un, false);
    for (int p = 0; p < n; ++p) {
      const auto up = static_cast<std::size_t>(p);
      const int cr = loss.crash_round[up];
      if (cr >= t && !halted[up]) sent[up] = state[up];
      alive[up] = cr > t;
    }
    std::vector<std::vector<StateId>> received(un);
    std::vector<StateId> output(un, kNoState);
    std::vector<StateId> next = state;
    for (int p = 0; p < n; ++p) {
      const auto up = static_cast<std::size_t>(p);
      if (!alive[up] || halted[up]) continue;
      std::size_t j = 0;
      for (int q = 0; q < n; ++q) {
        if (q == p) continue;
        const auto uq = static_cast<std::size_t>(q);
        others[j++] = (sent[uq] == kNoState || loss.lost(q, p, t)) ? space.lost() : sent[uq];
      }
      received[up] = others;
      TransitionKey key{t, setting.use_proc_id ? std::optional<int>(p) : std::nullopt, state[up], others};
      const auto out = machine.get(key);
      tr.encountered.push_back(std::move(key));
      if (!out) {
        halted[up] = true;
        continue;
      }
      output[up] = *out;
      next[up] = *out;
    }
    state = std::move(next);
    tr.sent.push_back(std::move(sent));
    tr.received.push_back(std::move(received));
    tr.output.push_back(std::move(output));
    tr.alive.push_back(std::move(alive));
  }
  for (int p = 0; p < n; ++p) {
    const auto up = static_cast<std::size_t>(p);
    if (tr.final_alive[up] && !halted[up] && space.is_decision(state[up])) tr.decisions[up] = state[up];
  }
  return tr;
}

Outcome run_outcome(const StateMachine& machine, const Scenario& scenario) {
  const auto& setting = machine.setting();
  const auto& space = machine.space();
  const auto& indexer = machine.indexer();
  const int n = setting.n;
  const int r = setting.rounds;
  const LossTable loss(scenario, n);
  const StateId lost_id = space.lost();

  std::array<StateId, kMaxProcesses> state{};
  std::array<StateId, kMaxProcesses> sent{};
  std::array<StateId, kMaxProcesses> others{};
  std::uint32_t halted = 0;
  for (int p = 0; p < n; ++p) state[static_cast<std::size_t>(p)] = scenario.init[static_cast<std::size_t>(p)];

  Outcome out;
  out.any_loss = scenario.any_loss(n, r);
  for (int t = 1; t <= r; ++t) {
    for (int p = 0; p < n; ++p) {
      const auto up = static_cast<std::size_t>(p);
      sent[up] = (loss.crash_round[up] >= t && !(halted >> p & 1u)) ? state[up] : kNoState;
    }
    for (int p = 0; p < n; ++p) {
      const auto up = static_cast<std::size_t>(p);
      if (loss.crash_round[up] <= t || (halted >> p & 1u)) continue;
      std::size_t j = 0;
      for (int q = 0; q < n; ++q) {
        if (q == p) continue;
        const auto uq = static_cast<std::size_t>(q);
        others[j++] = (sent[uq] == kNoState || loss.lost(q, p, t)) ? lost_id : sent[uq];
      }
      const auto idx = indexer.index(t, setting.use_proc_id ? p : -1, state[up],
                                     std::span<const StateId>(others.data(), j));
      const StateId o = idx == KeyIndexer::npos ? kNoState : machine.at_index(idx);
      if (o == kNoState) {
        halted |= 1u << p;
        continue;
      }
      state[up] = o;
    }
  }
  out.decisions.fill(kNoState);
  for (int p = 0; p < n; ++p) {
    const auto up = static_cast<std::size_t>(p);
    if (loss.crash_round[up] != kNeverCrashes) continue;
    out.final_alive |= 1u << p;
    if (!(halted >> p & 1u) && space.is_decision(state[up])) out.decisions[up] = state[up];
  }
  return out;
}

std::string format_trace(const ExecutionTrace& trace, const StateSpace& space) {
  std::ostringstream os;
  for (int t = 1; t <= trace.rounds; ++t) {
    const auto ut = static_cast<std::size_t>(t - 1);
    for (int p = 0; p < trace.n; ++p) {
      const auto up = static_cast<std::size_t>(p);
      const StateId sent = trace.sent[ut][up];
      if (sent == kNoState) continue;
      os << "r=" << t << " p=" << p << " sent=" << space.label(sent);
      if (!trace.alive[ut][up]) {
        os << " crashed\n";
        continue;
      }
      os << " recv=[";
      const auto& recv = trace.received[ut][up];
      for (std::size_t i = 0; i < recv.size(); ++i) {
        if (i) os << ",";
        os << space.label(recv[i]);
      }
      os << "] -> ";
      const StateId out = trace.output[ut][up];
      os << (out == kNoState ? std::string("UNDECIDED") : space.label(out)) << "\n";
    }
  }
  return os.str();
}

}  // namespace protosynth
