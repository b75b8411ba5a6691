#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "protosynth/verifier.hpp"

namespace ps = protosynth;

namespace {

ps::Setting setting(int n, int r, int f) {
  ps::Setting s;
  s.n = n;
  s.rounds = r;
  s.f = f;
  return s;
}

ps::ValidateOptions threads(int t) {
  ps::ValidateOptions o;
  o.threads = t;
  return o;
}

std::set<int> violated_ids(const std::vector<ps::PropertyId>& v) {
  std::set<int> out;
  for (auto id : v) out.insert(static_cast<int>(id));
  return out;
}

// Independent check of one scenario: naive message-matrix run plus the
// property formulas written out directly.
std::set<int> naive_check(const ps::ProtocolSpec& spec, const ps::StateMachine& m, const ps::Scenario& sc) {
  const auto tr = oracle::naive_run(m, sc);
  return oracle::naive_violations(spec.properties == ps::PropertySet::atomic_commit, m.space(), sc.init, tr.lost,
                                  tr.decisions, tr.alive);
}

std::set<std::size_t> reachable_keys(const ps::StateMachine& m, const std::vector<ps::Scenario>& scenarios) {
  std::set<std::size_t> keys;
  for (const auto& sc : scenarios)
    for (const auto& k : ps::run(m, sc).encountered) keys.insert(m.indexer().index(k));
  return keys;
}

}  // namespace

TEST(Verifier, BuiltinsPass) {
  const auto con = ps::ProtocolSpec::consensus();
  const auto ac = ps::ProtocolSpec::atomic_commit();
  for (const auto& s : {setting(2, 2, 1), setting(3, 3, 2)}) {
    const auto space = ps::encode_state_space(con, 2);
    EXPECT_TRUE(ps::validate(ps::builtin_floodset(con, s, space), con, ps::Phase::final_phase(s)).empty());
  }
  for (const auto& s : {setting(2, 2, 1), setting(3, 2, 1), setting(3, 3, 2)}) {
    const auto space = ps::encode_state_space(ac, 2);
    EXPECT_TRUE(ps::validate(ps::builtin_atomic_commit(ac, s, space), ac, ps::Phase::final_phase(s)).empty());
  }
}

TEST(Verifier, EmptyMachineFailsEveryScenario) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(2, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  const ps::StateMachine empty(spec.name, s, space);
  const auto all = ps::enumerate_scenarios(s, spec, space, ps::Phase::final_phase(s));
  const auto cx = ps::validate(empty, spec, ps::Phase::final_phase(s));
  ASSERT_EQ(cx.size(), all.size());
  for (std::size_t i = 0; i < cx.size(); ++i) {
    EXPECT_EQ(cx[i].scenario, all[i]);
    EXPECT_TRUE(violated_ids(cx[i].violated).count(4));
  }
}

// Single-output changes of transitions the reference protocol actually uses.
// Every last-round change is caught and every reported scenario fails on
// replay. Some earlier-round changes are masked by the protocol's redundancy;
// for those the naive checker must agree that nothing fails.
TEST(Verifier, FlippedReachableTransitions) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(3, 3, 2);
  const auto space = ps::encode_state_space(spec, 2);
  const auto base = ps::builtin_floodset(spec, s, space);
  const auto phase = ps::Phase::final_phase(s);
  const auto scenarios = ps::enumerate_scenarios(s, spec, space, phase);
  const auto keys = reachable_keys(base, scenarios);
  ASSERT_FALSE(keys.empty());

  int masked = 0, last_round = 0;
  for (std::size_t k : keys) {
    const int round = base.indexer().round_of(k);
    for (ps::StateId out : base.indexer().legal_outputs(round)) {
      if (out == base.at_index(k)) continue;
      auto m = base;
      m.set_index(k, out);
      const auto cx = ps::validate(m, spec, phase, threads(1));
      if (round == s.rounds) {
        ++last_round;
        EXPECT_GE(cx.size(), 1u) << base.indexer().key(k).to_string(space);
      }
      if (cx.empty()) {
        ++masked;
        for (const auto& sc : scenarios) EXPECT_TRUE(naive_check(spec, m, sc).empty());
      }
      for (const auto& c : cx) {
        EXPECT_FALSE(naive_check(spec, m, c.scenario).empty());
        EXPECT_EQ(ps::explain(m, spec, c.scenario), c);
      }
    }
  }
  EXPECT_GT(last_round, 0);
  // Frozen from the first mutation run, cross-checked by the naive checker above.
  EXPECT_EQ(masked, 14);
}

// Two processes, one crash, one round: all 2^6 total machines. Since
// properties bind only processes that never crash and a crashing process
// does not compute, "min of what arrived, own value on loss" and its max
// twin are correct.
TEST(Verifier, OneRoundTwoProcessMachines) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(2, 1, 1);
  const auto space = ps::encode_state_space(spec, 2);
  const ps::KeyIndexer idx(s, space);
  ASSERT_EQ(idx.size(), 6u);
  const auto scenarios = ps::enumerate_scenarios(s, spec, space, ps::Phase::final_phase(s));
  std::vector<std::vector<ps::StateId>> choices;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto legal = idx.legal_outputs(1);
    choices.emplace_back(legal.begin(), legal.end());
  }
  int machines = 0, passing = 0;
  ps::StateMachine m(spec.name, s, space);
  oracle::for_each_total_machine(choices, [&](const std::vector<ps::StateId>& table) {
    for (std::size_t k = 0; k < table.size(); ++k) m.set_index(k, table[k]);
    ++machines;
    const bool ok = ps::validate(m, spec, ps::Phase::final_phase(s), threads(1)).empty();
    bool naive_ok = true;
    for (const auto& sc : scenarios) naive_ok = naive_ok && naive_check(spec, m, sc).empty();
    EXPECT_EQ(ok, naive_ok);
    if (ok) {
      ++passing;
      const ps::StateId L = space.lost();
      for (int own = 0; own < 2; ++own) {
        const ps::StateId mine = space.initial(own);
        EXPECT_EQ(*m.get(ps::TransitionKey{1, std::nullopt, mine, {L}}), space.decision(own));
      }
    }
    return true;
  });
  EXPECT_EQ(machines, 64);
  EXPECT_EQ(passing, 2);
}

TEST(Verifier, AgreesWithNaiveChecker) {
  std::mt19937_64 rng(31);
  for (auto spec : {ps::ProtocolSpec::consensus(), ps::ProtocolSpec::atomic_commit()}) {
    for (const auto& s : {setting(2, 2, 1), setting(3, 2, 1), setting(3, 3, 2)}) {
      const auto space = ps::encode_state_space(spec, 2);
      const auto phase = ps::Phase::final_phase(s);
      const auto scenarios = ps::enumerate_scenarios(s, spec, space, phase);
      for (int trial = 0; trial < 4; ++trial) {
        auto m = spec.properties == ps::PropertySet::consensus ? ps::builtin_floodset(spec, s, space)
                                                               : ps::builtin_atomic_commit(spec, s, space);
        // Perturb a few keys so that failures appear.
        for (int j = 0; j < trial * 3; ++j) {
          const std::size_t k = rng() % m.num_keys();
          const auto legal = m.indexer().legal_outputs(m.indexer().round_of(k));
          m.set_index(k, legal[rng() % legal.size()]);
        }
        const auto cx = ps::validate(m, spec, phase, threads(1));
        std::vector<ps::Scenario> expected;
        for (const auto& sc : scenarios)
          if (!naive_check(spec, m, sc).empty()) expected.push_back(sc);
        ASSERT_EQ(cx.size(), expected.size()) << spec.name;
        for (std::size_t i = 0; i < cx.size(); ++i) {
          EXPECT_EQ(cx[i].scenario, expected[i]);
          EXPECT_EQ(violated_ids(cx[i].violated), naive_check(spec, m, expected[i]));
        }
      }
    }
  }
}

TEST(Verifier, ParallelMatchesSerial) {
  std::mt19937_64 rng(37);
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(4, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  auto m = ps::builtin_floodset(spec, s, space);
  for (int j = 0; j < 10; ++j) {
    const std::size_t k = rng() % m.num_keys();
    const auto legal = m.indexer().legal_outputs(m.indexer().round_of(k));
    m.set_index(k, legal[rng() % legal.size()]);
  }
  const auto phase = ps::Phase::final_phase(s);
  const auto serial = ps::validate(m, spec, phase, threads(1));
  EXPECT_FALSE(serial.empty());
  for (int t : {2, 3, 8}) EXPECT_EQ(ps::validate(m, spec, phase, threads(t)), serial);
  const auto all = ps::enumerate_scenarios(s, spec, space, phase);
  EXPECT_EQ(ps::validate_scenarios(m, spec, all, threads(4)), serial);
}

TEST(Verifier, EarlyPhaseChecksFewerScenarios) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(3, 3, 2);
  const auto space = ps::encode_state_space(spec, 2);
  const ps::StateMachine empty(spec.name, s, space);
  std::size_t last = 0;
  for (int q = 0; q <= s.rounds + 1; ++q) {
    const auto cx = ps::validate(empty, spec, ps::Phase{q});
    EXPECT_EQ(cx.size(), ps::enumerate_scenarios(s, spec, space, ps::Phase{q}).size());
    EXPECT_GE(cx.size(), last);
    last = cx.size();
  }
}

TEST(Verifier, DigestTracksExecution) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(3, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  const auto m = ps::builtin_floodset(spec, s, space);
  const ps::StateId i0 = space.initial(0), i1 = space.initial(1);
  const ps::Scenario a{{i0, i1, i1}, {}};
  const ps::Scenario b{{i1, i1, i1}, {}};
  EXPECT_EQ(ps::trace_digest(ps::run(m, a)), ps::trace_digest(ps::run(m, a)));
  EXPECT_NE(ps::trace_digest(ps::run(m, a)), ps::trace_digest(ps::run(m, b)));
}

TEST(Verifier, InferenceMachinePrefersFrozenOutputs) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(2, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  const ps::KeyIndexer idx(s, space);
  auto model = ps::PolicyModel::tabular(idx);
  // Push key 0 towards internal:b, then pin it to internal:a.
  model.parameters()[static_cast<std::size_t>(space.internal(1))] = 5.0;
  ps::FreezeList frozen(idx.size());
  EXPECT_EQ(ps::inference_machine(model, frozen, spec.name).at_index(0), space.internal(1));
  ps::FreezeEntry e;
  e.key_index = 0;
  e.key = idx.key(0);
  e.current = space.internal(0);
  e.tried = {e.current};
  frozen.push(e);
  const auto m = ps::inference_machine(model, frozen, spec.name);
  EXPECT_EQ(m.at_index(0), space.internal(0));
  EXPECT_TRUE(m.is_total());
  for (std::size_t k = 1; k < idx.size(); ++k)
    EXPECT_TRUE(idx.is_legal_output(idx.round_of(k), m.at_index(k)));
}
