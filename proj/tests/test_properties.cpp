#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "protosynth/properties.hpp"
#include "protosynth/scenario_gen.hpp"
#include "protosynth/simulator.hpp"
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

std::vector<int> ids(const ps::PropertyVerdict& v) {
  std::vector<int> out;
  for (const auto& x : v.violations) out.push_back(static_cast<int>(x.property));
  return out;
}

}  // namespace

TEST(Properties, ConflictingDecisionsViolateAgreement) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> init{space.initial(0), space.initial(1)};
  const std::vector<ps::StateId> dec{space.decision(0), space.decision(1)};
  const auto v = ps::evaluate_outcome(spec, space, init, false, dec, 0b11);
  EXPECT_TRUE(v.violates(ps::PropertyId::P1));
  EXPECT_EQ(v.reward, -1);
  EXPECT_EQ(v.violations[0].processes, (std::vector<int>{0, 1}));
}

TEST(Properties, AllCommitAllDecideCommit) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> init(3, space.initial(1));
  const std::vector<ps::StateId> dec(3, space.decision(1));
  const auto v = ps::evaluate_outcome(spec, space, init, false, dec, 0b111);
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.reward, 1);
}

TEST(Properties, SilentAborterStillForcesAbort) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> init{space.initial(1), space.initial(1), space.initial(0)};
  const std::vector<ps::StateId> dec{space.decision(1), space.decision(1), ps::kNoState};
  const auto v = ps::evaluate_outcome(spec, space, init, true, dec, 0b011);
  EXPECT_EQ(ids(v), (std::vector<int>{3}));
  EXPECT_EQ(v.reward, -1);
}

TEST(Properties, CommitRequirementNeedsLossFreeRun) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> init(2, space.initial(1));
  const std::vector<ps::StateId> dec(2, space.decision(0));
  EXPECT_EQ(ids(ps::evaluate_outcome(spec, space, init, false, dec, 0b11)), (std::vector<int>{2}));
  EXPECT_TRUE(ps::evaluate_outcome(spec, space, init, true, dec, 0b11).ok());
}

TEST(Properties, UniformConsensusInputsForceTheirValue) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> ones(2, space.initial(1));
  const std::vector<ps::StateId> zeros(2, space.initial(0));
  const std::vector<ps::StateId> dec0(2, space.decision(0));
  const std::vector<ps::StateId> dec1(2, space.decision(1));
  EXPECT_EQ(ids(ps::evaluate_outcome(spec, space, ones, true, dec0, 0b11)), (std::vector<int>{2}));
  EXPECT_EQ(ids(ps::evaluate_outcome(spec, space, zeros, true, dec1, 0b11)), (std::vector<int>{3}));
}

TEST(Properties, UndecidedAliveProcessViolatesTermination) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const std::vector<ps::StateId> init{space.initial(0), space.initial(1)};
  const std::vector<ps::StateId> dec{space.decision(0), ps::kNoState};
  EXPECT_EQ(ids(ps::evaluate_outcome(spec, space, init, false, dec, 0b11)), (std::vector<int>{4}));
  // A crashed process owes no decision.
  EXPECT_TRUE(ps::evaluate_outcome(spec, space, init, true, dec, 0b01).ok());
}

TEST(Properties, FastCheckAgreesWithNaiveFormulas) {
  std::mt19937_64 rng(5);
  for (auto spec : {ps::ProtocolSpec::consensus(), ps::ProtocolSpec::atomic_commit()}) {
    const auto space = ps::encode_state_space(spec, 2);
    for (int trial = 0; trial < 5000; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 3);
      std::vector<ps::StateId> init, dec;
      std::vector<bool> alive;
      std::uint32_t mask = 0;
      for (int p = 0; p < n; ++p) {
        init.push_back(space.initial(static_cast<int>(rng() % 2)));
        const int d = static_cast<int>(rng() % 3);
        dec.push_back(d == 2 ? ps::kNoState : space.decision(d));
        alive.push_back(rng() % 4 != 0);
        if (alive.back()) mask |= 1u << p;
      }
      const bool lost = rng() % 2;
      std::vector<ps::StateId> dec_alive = dec;
      for (int p = 0; p < n; ++p)
        if (!alive[static_cast<std::size_t>(p)]) dec_alive[static_cast<std::size_t>(p)] = ps::kNoState;
      const auto expected = oracle::naive_violations(spec.properties == ps::PropertySet::atomic_commit, space, init,
                                                     lost, dec_alive, alive);
      const auto v = ps::evaluate_outcome(spec, space, init, lost, dec_alive, mask);
      const auto got = ids(v);
      EXPECT_EQ(std::set<int>(got.begin(), got.end()), expected);
      EXPECT_EQ(ps::outcome_ok(spec.properties, space, init, lost, dec_alive, mask), expected.empty());
      EXPECT_EQ(v.reward, expected.empty() ? 1 : -1);
    }
  }
}

TEST(DefiniteDecision, Examples) {
  const auto con = ps::ProtocolSpec::consensus();
  const auto cs = ps::encode_state_space(con, 2);
  for (bool flag : {false, true}) {
    EXPECT_EQ(ps::definite_decision(con, cs, std::vector<ps::StateId>(3, cs.initial(0)), flag), cs.decision(0));
    EXPECT_EQ(ps::definite_decision(con, cs, std::vector<ps::StateId>{cs.initial(0), cs.initial(1)}, flag),
              std::nullopt);
  }
  const auto ac = ps::ProtocolSpec::atomic_commit();
  const auto as = ps::encode_state_space(ac, 2);
  const std::vector<ps::StateId> commits(2, as.initial(1));
  EXPECT_EQ(ps::definite_decision(ac, as, commits, true), std::nullopt);
  EXPECT_EQ(ps::definite_decision(ac, as, commits, false), as.decision(1));
  EXPECT_EQ(ps::definite_decision(ac, as, std::vector<ps::StateId>{as.initial(1), as.initial(0)}, true),
            as.decision(0));
}

// An all-commit scenario in which the reference protocol aborts without
// breaking any requirement: commit is not forced once losses are possible.
TEST(DefiniteDecision, CommitIsNotForcedUnderLosses) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  const auto s = setting(2, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  const auto m = ps::builtin_atomic_commit(spec, s, space);
  const ps::Scenario sc{{space.initial(1), space.initial(1)}, {ps::Crash{1, 1, {}}}};
  const auto tr = ps::run(m, sc);
  EXPECT_EQ(tr.decisions[0], space.decision(0));
  EXPECT_TRUE(ps::evaluate(spec, space, sc, tr).ok());
}

// definite_decision(init) = d means every machine correct on all of init's
// scenarios decides d there; checked against every total machine for n = 2.
TEST(DefiniteDecision, AgreesWithExhaustiveMachineScan) {
  for (auto spec : {ps::ProtocolSpec::consensus(), ps::ProtocolSpec::atomic_commit()}) {
    for (int r = 1; r <= 2; ++r) {
      const auto s = setting(2, r, 1);
      const auto space = ps::encode_state_space(spec, 2);
      const ps::KeyIndexer idx(s, space);
      std::vector<std::vector<ps::StateId>> choices;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto legal = idx.legal_outputs(idx.round_of(k));
        choices.emplace_back(legal.begin(), legal.end());
      }
      for (bool allow_losses : {false, true}) {
        for (const auto& init : ps::enumerate_init_patterns(s, spec, space, ps::Phase::final_phase(s))) {
          std::vector<ps::Scenario> scenarios;
          for (const auto& loss : ps::enumerate_loss_patterns(s, ps::Phase::final_phase(s))) {
            ps::Scenario sc{init, loss};
            if (!allow_losses && sc.any_loss(s.n, s.rounds)) continue;
            scenarios.push_back(sc);
          }
          // Decisions reached by alive processes of correct machines.
          std::set<ps::StateId> reached;
          ps::StateMachine m(spec.name, s, space);
          oracle::for_each_total_machine(choices, [&](const std::vector<ps::StateId>& table) {
            for (std::size_t k = 0; k < table.size(); ++k) m.set_index(k, table[k]);
            std::set<ps::StateId> local;
            for (const auto& sc : scenarios) {
              const auto tr = ps::run(m, sc);
              if (!ps::evaluate(spec, space, sc, tr).ok()) return true;
              for (auto d : tr.decisions)
                if (d != ps::kNoState) local.insert(d);
            }
            reached.insert(local.begin(), local.end());
            return true;
          });
          const auto forced = ps::definite_decision(spec, space, init, allow_losses);
          if (forced) {
            EXPECT_LE(reached.size(), 1u);
            if (!reached.empty()) EXPECT_EQ(*reached.begin(), *forced);
          } else if (r == 2) {
            // With a feasible round count both outcomes appear somewhere.
            EXPECT_EQ(reached.size(), 2u) << spec.name << " allow_losses=" << allow_losses;
          }
        }
      }
    }
  }
}

TEST(Builtins, FloodSetPassesEveryScenario) {
  const auto spec = ps::ProtocolSpec::consensus();
  for (const auto& s : {setting(2, 2, 1), setting(3, 2, 1), setting(3, 3, 2), setting(4, 4, 3)}) {
    const auto space = ps::encode_state_space(spec, 2);
    const auto m = ps::builtin_floodset(spec, s, space);
    EXPECT_TRUE(m.is_total());
    EXPECT_TRUE(ps::validate(m, spec, ps::Phase::final_phase(s)).empty()) << s.n << "-" << s.f;
  }
}

TEST(Builtins, FloodSetUniformOnes) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(3, 3, 2);
  const auto space = ps::encode_state_space(spec, 2);
  const auto tr = ps::run(ps::builtin_floodset(spec, s, space), ps::Scenario{std::vector<ps::StateId>(3, space.initial(1)), {}});
  for (auto d : tr.decisions) EXPECT_EQ(d, space.decision(1));
}

TEST(Builtins, AtomicCommitPassesEveryScenario) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  for (const auto& s : {setting(2, 2, 1), setting(3, 2, 1), setting(4, 2, 1), setting(3, 3, 2)}) {
    const auto space = ps::encode_state_space(spec, 2);
    const auto m = ps::builtin_atomic_commit(spec, s, space);
    EXPECT_TRUE(m.is_total());
    EXPECT_TRUE(ps::validate(m, spec, ps::Phase::final_phase(s)).empty()) << s.n << "-" << s.f;
  }
}

TEST(Builtins, AtomicCommitAllCommitCommits) {
  const auto spec = ps::ProtocolSpec::atomic_commit();
  for (int n = 2; n <= 4; ++n) {
    const auto s = setting(n, 2, 1);
    const auto space = ps::encode_state_space(spec, 2);
    const auto tr = ps::run(ps::builtin_atomic_commit(spec, s, space),
                            ps::Scenario{std::vector<ps::StateId>(static_cast<std::size_t>(n), space.initial(1)), {}});
    for (auto d : tr.decisions) EXPECT_EQ(d, space.decision(1));
  }
}

TEST(Builtins, WrongPropertySetIsRejected) {
  const auto s = setting(2, 2, 1);
  const auto con = ps::ProtocolSpec::consensus();
  const auto ac = ps::ProtocolSpec::atomic_commit();
  EXPECT_THROW(ps::builtin_floodset(ac, s, ps::encode_state_space(ac, 2)), ps::SettingMismatch);
  EXPECT_THROW(ps::builtin_atomic_commit(con, s, ps::encode_state_space(con, 2)), ps::SettingMismatch);
}
