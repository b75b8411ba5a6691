#include "protosynth/scenario_gen.hpp"

#include "protosynth/properties.hpp"

namespace protosynth {

std::vector<std::vector<StateId>> enumerate_init_patterns(const Setting& setting,
                                                          const ProtocolSpec& spec,
                                                          const StateSpace& space, Phase phase) {
  const int n = setting.n;
  const int x = space.num_initials();
  const bool definite_only = phase.definite_inits_only(setting);
  const bool allow_losses = setting.f > 0;

  std::vector<std::vector<StateId>> out;
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  std::vector<StateId> init(static_cast<std::size_t>(n));
  while (true) {
    for (int p = 0; p < n; ++p) init[static_cast<std::size_t>(p)] = space.initial(digits[static_cast<std::size_t>(p)]);
    if (!definite_only || definite_decision(spec, space, init, allow_losses)) out.push_back(init);
    int p = n - 1;
    while (p >= 0 && ++digits[static_cast<std::size_t>(p)] == x) digits[static_cast<std::size_t>(p--)] = 0;
    if (p < 0) break;
  }
  return out;
}

namespace {

void extend_patterns(const Setting& setting, int lo, int proc, int budget,
                     std::vector<Crash>& current, std::vector<std::vector<Crash>>& out) {
  if (proc == setting.n) {
    out.push_back(current);
    return;
  }
  extend_patterns(setting, lo, proc + 1, budget, current, out);
  if (budget == 0) return;
  const std::uint32_t subsets = 1u << (setting.n - 1);
  for (int t = lo; t <= setting.rounds; ++t) {
    for (std::uint32_t m = 0; m < subsets; ++m) {
      Crash c{proc, t, {}};
      int bit = 0;
      for (int q = 0; q < setting.n; ++q) {
        if (q == proc) continue;
        if (m >> bit & 1u) c.delivered_to.push_back(q);
        ++bit;
      }
      current.push_back(std::move(c));
      extend_patterns(setting, lo, proc + 1, budget - 1, current, out);
      current.pop_back();
    }
  }
}

}  // namespace

std::vector<std::vector<Crash>> enumerate_loss_patterns(const Setting& setting, Phase phase) {
  std::vector<std::vector<Crash>> out;
  std::vector<Crash> current;
  extend_patterns(setting, phase.first_crash_round(setting), 0, setting.f, current, out);
  return out;
}

std::vector<Scenario> enumerate_scenarios(const Setting& setting, const ProtocolSpec& spec,
                                          const StateSpace& space, Phase phase) {
  const auto inits = enumerate_init_patterns(setting, spec, space, phase);
  const auto losses = enumerate_loss_patterns(setting, phase);
  std::vector<Scenario> out;
  out.reserve(inits.size() * losses.size());
  for (const auto& init : inits) {
    for (const auto& loss : losses) out.push_back(Scenario{init, loss});
  }
  return out;
}

const Scenario& sample_scenario_with(double u, std::span<const Scenario> phase_scenarios,
                                     std::span<const Scenario> failed, Rng& rng) {
  if (u < kFreshScenarioProbability || failed.empty()) {
    if (phase_scenarios.empty()) throw ConfigError("phase has no scenarios");
    std::uniform_int_distribution<std::size_t> pick(0, phase_scenarios.size() - 1);
    return phase_scenarios[pick(rng)];
  }
  std::uniform_int_distribution<std::size_t> pick(0, failed.size() - 1);
  return failed[pick(rng)];
}

const Scenario& sample_scenario(std::span<const Scenario> phase_scenarios,
                                std::span<const Scenario> failed, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  return sample_scenario_with(u, phase_scenarios, failed, rng);
}

}  // namespace protosynth
