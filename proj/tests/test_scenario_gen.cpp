#include <gtest/gtest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "protosynth/properties.hpp"
#include "protosynth/scenario_gen.hpp"

namespace ps = protosynth;

namespace {

ps::Setting setting(int n, int r, int f) {
  ps::Setting s;
  s.n = n;
  s.rounds = r;
  s.f = f;
  return s;
}

std::vector<std::vector<ps::StateId>> all_inits(int n, const ps::StateSpace& space) {
  std::vector<std::vector<ps::StateId>> out;
  for (int m = 0; m < (1 << n); ++m) {
    std::vector<ps::StateId> v;
    for (int p = n - 1; p >= 0; --p) v.push_back(space.initial((m >> p) & 1));
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(ScenarioGen, FinalPhaseInitCount) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto s = setting(2, 2, 1);
  const auto space = ps::encode_state_space(spec, 2);
  EXPECT_EQ(ps::enumerate_init_patterns(s, spec, space, ps::Phase::final_phase(s)).size(), 4u);
}

TEST(ScenarioGen, LastRoundCrashesOnly) {
  const auto s = setting(2, 2, 1);
  EXPECT_EQ(ps::enumerate_loss_patterns(s, ps::Phase{0}).size(), 5u);
  EXPECT_TRUE(ps::enumerate_loss_patterns(s, ps::Phase{0}).front().empty());
}

// Loss-pattern and scenario counts for every small setting and phase,
// against two independently written enumerators.
TEST(ScenarioGen, CountsMatchOracles) {
  for (auto spec : {ps::ProtocolSpec::consensus(), ps::ProtocolSpec::atomic_commit()}) {
    const auto space = ps::encode_state_space(spec, 2);
    for (int n = 2; n <= 3; ++n) {
      for (int r = 1; r <= 3; ++r) {
        for (int f = 0; f <= std::min(2, n - 1); ++f) {
          const auto s = setting(n, r, f);
          for (int q = 0; q <= r + 1; ++q) {
            const ps::Phase phase{q};
            const int lo = phase.first_crash_round(s);
            const auto losses = ps::enumerate_loss_patterns(s, phase);
            EXPECT_EQ(static_cast<long long>(losses.size()), oracle::count_loss_patterns(n, r, f, lo));

            std::vector<std::vector<ps::StateId>> inits;
            for (const auto& init : all_inits(n, space)) {
              if (!phase.definite_inits_only(s) || ps::definite_decision(spec, space, init, f > 0)) inits.push_back(init);
            }
            const auto got = ps::enumerate_scenarios(s, spec, space, phase);
            const auto expected = oracle::naive_scenarios(n, r, f, lo, inits);
            ASSERT_EQ(got.size(), expected.size()) << n << r << f << " phase " << q;
            EXPECT_EQ(std::set<ps::Scenario>(got.begin(), got.end()),
                      std::set<ps::Scenario>(expected.begin(), expected.end()));
          }
        }
      }
    }
  }
}

TEST(ScenarioGen, EnumerationIsValidAndDuplicateFree) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  for (const auto& s : {setting(3, 3, 2), setting(4, 2, 1)}) {
    for (int q = 0; q <= s.rounds + 1; ++q) {
      const ps::Phase phase{q};
      const auto all = ps::enumerate_scenarios(s, spec, space, phase);
      EXPECT_EQ(std::set<ps::Scenario>(all.begin(), all.end()).size(), all.size());
      for (const auto& sc : all) {
        EXPECT_NO_THROW(sc.validate(s, space));
        for (const auto& c : sc.crashes) EXPECT_GE(c.round, phase.first_crash_round(s));
      }
    }
  }
}

TEST(ScenarioGen, PhasesAreNested) {
  for (auto spec : {ps::ProtocolSpec::consensus(), ps::ProtocolSpec::atomic_commit()}) {
    const auto space = ps::encode_state_space(spec, 2);
    const auto s = setting(3, 3, 2);
    for (int q = 0; q <= s.rounds; ++q) {
      const auto a = ps::enumerate_scenarios(s, spec, space, ps::Phase{q});
      const auto b = ps::enumerate_scenarios(s, spec, space, ps::Phase{q + 1});
      const std::set<ps::Scenario> bigger(b.begin(), b.end());
      for (const auto& sc : a) EXPECT_TRUE(bigger.count(sc)) << "phase " << q;
    }
  }
}

TEST(ScenarioGen, EarlyPhasesKeepOnlyDefiniteInits) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const auto s = setting(3, 3, 2);
  const auto inits = ps::enumerate_init_patterns(s, spec, space, ps::Phase{0});
  ASSERT_EQ(inits.size(), 2u);
  EXPECT_EQ(inits[0], std::vector<ps::StateId>(3, space.initial(0)));
  EXPECT_EQ(inits[1], std::vector<ps::StateId>(3, space.initial(1)));
}

TEST(Sampler, EmptyFailedListIsUniformOverPhase) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const auto s = setting(2, 2, 1);
  const auto all = ps::enumerate_scenarios(s, spec, space, ps::Phase::final_phase(s));
  ps::Rng rng(1);
  std::map<const ps::Scenario*, int> hits;
  const int draws = 36000;
  for (int i = 0; i < draws; ++i) ++hits[&ps::sample_scenario_with(0.99, all, {}, rng)];
  ASSERT_EQ(hits.size(), all.size());
  const double expected = static_cast<double>(draws) / static_cast<double>(all.size());
  for (const auto& [sc, c] : hits) EXPECT_NEAR(c, expected, 0.15 * expected);
}

TEST(Sampler, HighDrawPicksTheFailedScenario) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const auto s = setting(2, 2, 1);
  const auto all = ps::enumerate_scenarios(s, spec, space, ps::Phase::final_phase(s));
  const std::vector<ps::Scenario> failed{all[3]};
  ps::Rng rng(2);
  EXPECT_EQ(ps::sample_scenario_with(0.9, all, failed, rng), all[3]);
}

TEST(Sampler, FailedBranchFrequency) {
  const auto spec = ps::ProtocolSpec::consensus();
  const auto space = ps::encode_state_space(spec, 2);
  const auto s = setting(2, 2, 1);
  const auto all = ps::enumerate_scenarios(s, spec, space, ps::Phase::final_phase(s));
  // A failed list outside the phase set makes the branch observable.
  const std::vector<ps::Scenario> failed{ps::Scenario{{space.initial(0), space.initial(0)}, {ps::Crash{0, 1, {}}, ps::Crash{1, 1, {}}}}};
  ps::Rng rng(3);
  int from_failed = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) from_failed += &ps::sample_scenario(all, failed, rng) == &failed[0];
  EXPECT_NEAR(static_cast<double>(from_failed) / draws, 0.70, 0.02);
}
