#include "protosynth/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "protosynth/json_io.hpp"
#include "protosynth/scenario_gen.hpp"

namespace protosynth {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::mcts: return "mcts";
    case Mode::mcts_dfs: return "mcts-dfs";
    case Mode::ggms: return "ggms";
  }
  return "?";
}

Mode parse_mode(std::string_view s) {
  if (s == "mcts") return Mode::mcts;
  if (s == "mcts-dfs" || s == "mcts_dfs") return Mode::mcts_dfs;
  if (s == "ggms") return Mode::ggms;
  throw ConfigError("unknown mode: " + std::string(s));
}

std::string_view to_string(RunStatus s) { return s == RunStatus::verified ? "verified" : "timeout"; }

double default_time_limit(const Setting& setting) {
  if (setting.n <= 2) return 3600.0;
  if (setting.n == 3) return 4.0 * 3600.0;
  return 24.0 * 3600.0;
}

void RunConfig::validate() const {
  spec.validate();
  setting.validate();
  if (episode_scenarios < 1) throw ConfigError("episode_scenarios must be positive");
  if (time_limit < 0) throw ConfigError("time limit must not be negative");
  if (max_episodes < 0) throw ConfigError("max_episodes must not be negative");
  if (train.epochs < 0 || train.batch_size < 1 || train.learning_rate <= 0) {
    throw ConfigError("bad training options");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

class CsvSinks {
 public:
  explicit CsvSinks(const RunConfig& c) {
    if (!c.log_path.empty()) {
      log_.open(c.log_path);
      if (!log_) throw ConfigError("cannot write " + c.log_path);
      log_ << kRunCsvHeader << "\n";
    }
    const std::string events = !c.events_path.empty() ? c.events_path
                               : !c.log_path.empty()  ? c.log_path + ".events.csv"
                                                      : std::string();
    if (!events.empty()) {
      events_.open(events);
      if (!events_) throw ConfigError("cannot write " + events);
      events_ << "episode,action,key,output\n";
    }
  }

  void episode(const EpisodeLog& e) {
    if (!log_.is_open()) return;
    log_ << e.episode << ',' << e.phase << ',' << e.counterexamples << ',' << e.freezes << ','
         << e.unfreezes << ',' << e.buffer_size << ',' << std::fixed << std::setprecision(3) << e.seconds
         << "\n";
    log_.flush();
  }

  void event(long episode, const FreezeEvent& ev, const KeyIndexer& indexer) {
    if (!events_.is_open()) return;
    const auto& space = indexer.space();
    events_ << episode << ',' << to_string(ev.action) << ",\"" << indexer.key(ev.key_index).to_string(space)
            << "\"," << space.label(ev.output) << "\n";
    events_.flush();
  }

 private:
  std::ofstream log_;
  std::ofstream events_;
};

}  // namespace

SynthesisResult synthesize(const RunConfig& config, const std::function<void(const EpisodeLog&)>& on_episode) {
  config.validate();
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  const double limit = config.effective_time_limit();

  const ProtocolSpec& spec = config.spec;
  const Setting& setting = config.setting;
  const StateSpace space = encode_state_space(spec, setting.k);
  const KeyIndexer indexer(setting, space);
  const bool freezing = config.mode != Mode::mcts;

  Rng rng(config.seed);
  PolicyModel model = config.model == PolicyModel::Kind::mlp ? PolicyModel::mlp(indexer, rng)
                                                              : PolicyModel::tabular(indexer);
  FreezeList frozen = config.mode == Mode::ggms ? group_freeze(spec, setting, space) : FreezeList(indexer.size());
  Phase phase = config.mode == Mode::ggms ? Phase{0} : Phase::final_phase(setting);

  CsvSinks sinks(config);
  SynthesisResult result;
  for (const auto& e : frozen.entries()) {
    const FreezeEvent ev{FreezeEvent::Action::freeze, e.key_index, e.current};
    result.freeze_events.push_back({0, ev});
    sinks.event(0, ev, indexer);
  }

  SearchContext ctx(spec, setting, space, phase, config.search);
  TrainingBuffer buffer;
  std::vector<Scenario> scenarios = enumerate_scenarios(setting, spec, space, phase);
  std::vector<Scenario> failed;
  int since_add = 0;

  std::optional<StateMachine> best;
  int best_phase = -1;
  std::size_t best_cex = 0;
  bool out_of_time = false;

  for (long episode = 1; !out_of_time; ++episode) {
    EpisodeLog row;
    row.episode = episode;
    row.phase = phase.id;
    auto record = [&](const FreezeEvent& ev) {
      result.freeze_events.push_back({episode, ev});
      sinks.event(episode, ev, indexer);
      if (ev.action == FreezeEvent::Action::freeze) ++row.freezes;
      else ++row.unfreezes;
    };

    ctx.set_phase(phase);
    ctx.set_priors(model.predict_all());
    ctx.set_frozen(frozen.table());
    for (int i = 0; i < config.episode_scenarios; ++i) {
      const Scenario& sc = sample_scenario(scenarios, failed, rng);
      const MctsResult res = run_mcts(ctx, sc, rng);
      buffer.append(res.pairs);
      if (freezing) {
        const UnfreezeQuery query{config.oracle_enabled, &spec, &setting, &space, &sc, config.oracle_bound};
        const auto events = determine_unfreeze(res.reward, res.activated, frozen, indexer, query);
        for (const auto& ev : events) record(ev);
        if (!events.empty()) ctx.set_frozen(frozen.table());
      }
      if (elapsed() > limit) {
        out_of_time = true;
        break;
      }
    }
    if (out_of_time) break;

    if (freezing) {
      ++since_add;
      if (auto ev = determine_freezing(buffer, frozen, indexer, since_add, config.ambiguity)) {
        since_add = 0;
        record(*ev);
      }
    }
    train(model, buffer, config.train, rng);
    StateMachine machine = inference_machine(model, frozen, spec.name);
    const auto cex = validate(machine, spec, phase, config.validation);
    failed.clear();
    for (const auto& c : cex) failed.push_back(c.scenario);

    row.counterexamples = cex.size();
    row.buffer_size = buffer.size();
    row.seconds = elapsed();
    result.log.push_back(row);
    sinks.episode(row);
    if (on_episode) on_episode(row);

    if (phase.id > best_phase || (phase.id == best_phase && cex.size() < best_cex)) {
      best = machine;
      best_phase = phase.id;
      best_cex = cex.size();
    }

    if (cex.empty()) {
      if (phase.is_final(setting)) {
        result.status = RunStatus::verified;
        result.machine = std::move(machine);
        break;
      }
      phase = Phase{phase.id + 1};
      scenarios = enumerate_scenarios(setting, spec, space, phase);
    }
    if (elapsed() > limit || (config.max_episodes > 0 && episode >= config.max_episodes)) out_of_time = true;
  }

  if (result.status != RunStatus::verified) {
    result.machine = best ? *best : inference_machine(model, frozen, spec.name);
  }
  result.seconds = elapsed();
  if (!config.machine_path.empty()) write_json_file(config.machine_path, machine_to_json(result.machine));
  if (!config.checkpoint_path.empty()) write_json_file(config.checkpoint_path, model.to_json());
  return result;
}

std::vector<BenchRow> bench(const std::vector<BenchEntry>& entries,
                            const std::function<void(const BenchEntry&, int, const SynthesisResult&)>& on_run) {
  std::vector<BenchRow> rows;
  for (const auto& entry : entries) {
    if (entry.repeats <= 0) continue;
    BenchRow row;
    row.name = entry.name;
    std::vector<double> times;
    for (int i = 0; i < entry.repeats; ++i) {
      RunConfig cfg = entry.config;
      cfg.seed = entry.config.seed + static_cast<std::uint64_t>(i);
      if (!cfg.log_path.empty()) cfg.log_path += "." + std::to_string(i) + ".csv";
      if (!cfg.machine_path.empty()) cfg.machine_path += "." + std::to_string(i) + ".json";
      cfg.checkpoint_path.clear();
      const SynthesisResult res = synthesize(cfg);
      ++row.runs;
      if (res.status == RunStatus::verified) {
        ++row.successes;
        times.push_back(res.seconds);
      }
      if (on_run) on_run(entry, i, res);
    }
    if (!times.empty()) {
      double sum = 0;
      for (double t : times) sum += t;
      row.avg_seconds = sum / static_cast<double>(times.size());
      row.min_seconds = *std::min_element(times.begin(), times.end());
      row.max_seconds = *std::max_element(times.begin(), times.end());
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "name" << std::right << std::setw(10) << "success" << std::setw(12)
     << "avg_min" << std::setw(12) << "min_min" << std::setw(12) << "max_min" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.name << std::right << std::setw(10)
       << (std::to_string(r.successes) + "/" + std::to_string(r.runs));
    if (r.successes > 0) {
      os << std::setw(12) << r.avg_seconds / 60 << std::setw(12) << r.min_seconds / 60 << std::setw(12)
         << r.max_seconds / 60;
    } else {
      os << std::setw(12) << "-" << std::setw(12) << "-" << std::setw(12) << "-";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace protosynth
