#include "protosynth/verifier.hpp"

#include <algorithm>
#include <thread>

namespace protosynth {

std::uint64_t trace_digest(const ExecutionTrace& trace) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::int64_t v) {
    h ^= static_cast<std::uint64_t>(v);
    h *= 1099511628211ull;
  };
  for (std::size_t t = 0; t < trace.sent.size(); ++t) {
    for (StateId s : trace.sent[t]) mix(s);
    for (StateId s : trace.output[t]) mix(s);
  }
  return h;
}

Counterexample explain(const StateMachine& machine, const ProtocolSpec& spec, const Scenario& scenario) {
  const ExecutionTrace trace = run(machine, scenario);
  const PropertyVerdict verdict = evaluate(spec, machine.space(), scenario, trace);
  Counterexample c;
  c.scenario = scenario;
  for (const auto& v : verdict.violations) c.violated.push_back(v.property);
  c.digest = trace_digest(trace);
  return c;
}

namespace {

int worker_count(const ValidateOptions& options, std::size_t jobs) {
  int t = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(t, 1);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), std::max<std::size_t>(jobs, 1)));
}

bool passes(const StateMachine& machine, PropertySet props, const Scenario& sc) {
  const Outcome o = run_outcome(machine, sc);
  const auto n = static_cast<std::size_t>(machine.setting().n);
  return outcome_ok(props, machine.space(), sc.init, o.any_loss,
                    std::span<const StateId>(o.decisions.data(), n), o.final_alive);
}

// Splits [0, total) into contiguous chunks, checks each in its own thread and
// concatenates the failing indices in order.
template <typename Check>
std::vector<std::size_t> failing_indices(std::size_t total, int threads, Check check) {
  std::vector<std::vector<std::size_t>> found(static_cast<std::size_t>(threads));
  auto work = [&](int w) {
    const std::size_t lo = total * static_cast<std::size_t>(w) / static_cast<std::size_t>(threads);
    const std::size_t hi = total * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(threads);
    check(lo, hi, found[static_cast<std::size_t>(w)]);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  std::vector<std::size_t> out;
  for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace

std::vector<Counterexample> validate(const StateMachine& machine, const ProtocolSpec& spec, Phase phase,
                                     const ValidateOptions& options) {
  const Setting& setting = machine.setting();
  const auto inits = enumerate_init_patterns(setting, spec, machine.space(), phase);
  const auto losses = enumerate_loss_patterns(setting, phase);
  const std::size_t total = inits.size() * losses.size();
  const int threads = worker_count(options, total / 4096);

  const auto bad = failing_indices(total, threads, [&](std::size_t lo, std::size_t hi, std::vector<std::size_t>& out) {
    Scenario sc;
    for (std::size_t i = lo; i < hi; ++i) {
      sc.init = inits[i / losses.size()];
      sc.crashes = losses[i % losses.size()];
      if (!passes(machine, spec.properties, sc)) out.push_back(i);
    }
  });
  std::vector<Counterexample> result;
  result.reserve(bad.size());
  for (std::size_t i : bad) {
    result.push_back(explain(machine, spec, Scenario{inits[i / losses.size()], losses[i % losses.size()]}));
  }
  return result;
}

std::vector<Counterexample> validate_scenarios(const StateMachine& machine, const ProtocolSpec& spec,
                                               std::span<const Scenario> scenarios,
                                               const ValidateOptions& options) {
  const int threads = worker_count(options, scenarios.size() / 4096);
  const auto bad = failing_indices(scenarios.size(), threads,
                                   [&](std::size_t lo, std::size_t hi, std::vector<std::size_t>& out) {
                                     for (std::size_t i = lo; i < hi; ++i) {
                                       if (!passes(machine, spec.properties, scenarios[i])) out.push_back(i);
                                     }
                                   });
  std::vector<Counterexample> result;
  for (std::size_t i : bad) result.push_back(explain(machine, spec, scenarios[i]));
  return result;
}

StateMachine inference_machine(const PolicyModel& model, const FreezeList& frozen, const std::string& spec_name) {
  const KeyIndexer& indexer = model.indexer();
  StateMachine m(spec_name, indexer.setting(), indexer.space());
  const auto table = model.predict_all();
  const auto a = static_cast<std::size_t>(model.alphabet());
  for (std::size_t k = 0; k < indexer.size(); ++k) {
    if (frozen.num_keys() > 0 && frozen.contains(k)) {
      m.set_index(k, frozen.output(k));
      continue;
    }
    const std::span<const double> dist(table.data() + k * a, a);
    m.set_index(k, argmax_output(dist, indexer.legal_outputs(indexer.round_of(k))));
  }
  return m;
}

}  // namespace protosynth
