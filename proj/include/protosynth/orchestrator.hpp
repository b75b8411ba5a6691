#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protosynth/core_model.hpp"
#include "protosynth/freezer.hpp"
#include "protosynth/policy.hpp"
#include "protosynth/search.hpp"
#include "protosynth/verifier.hpp"

namespace protosynth {

/// mcts: search and training only, final phase from the start.
/// mcts_dfs: adds freezing and backtracking.
/// ggms: adds group freezing and the phase curriculum.
enum class Mode { mcts, mcts_dfs, ggms };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);

/// 1 h for two processes, 4 h for three, 24 h beyond.
double default_time_limit(const Setting& setting);

struct RunConfig {
  ProtocolSpec spec = ProtocolSpec::consensus();
  Setting setting;
  Mode mode = Mode::ggms;
  std::uint64_t seed = 1;
  double time_limit = 0.0;  // seconds; 0 picks default_time_limit
  long max_episodes = 0;    // 0: until verified or out of time
  int episode_scenarios = 100;
  SearchOptions search;
  TrainOptions train;
  PolicyModel::Kind model = PolicyModel::Kind::mlp;
  bool oracle_enabled = true;
  int oracle_bound = kDefaultSolvableBound;
  AmbiguityRule ambiguity;
  ValidateOptions validation;

  std::string log_path;         // per-episode CSV, empty to skip
  std::string events_path;      // freeze events CSV; defaults to <log>.events.csv
  std::string machine_path;     // exported machine JSON
  std::string checkpoint_path;  // final model parameters

  double effective_time_limit() const { return time_limit > 0 ? time_limit : default_time_limit(setting); }
  void validate() const;
};

struct EpisodeLog {
  long episode = 0;
  int phase = 0;
  std::size_t counterexamples = 0;
  int freezes = 0;
  int unfreezes = 0;
  std::size_t buffer_size = 0;
  double seconds = 0.0;  // since the start of the run

  friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

struct FreezeLogEntry {
  long episode = 0;
  FreezeEvent event;
};

enum class RunStatus { verified, timeout };

std::string_view to_string(RunStatus s);

struct SynthesisResult {
  RunStatus status = RunStatus::timeout;
  StateMachine machine;  // verified machine, or the best one seen
  std::vector<EpisodeLog> log;
  std::vector<FreezeLogEntry> freeze_events;
  double seconds = 0.0;
};

inline constexpr std::string_view kRunCsvHeader =
    "episode,phase,counterexamples,freezes,unfreezes,buffer_size,seconds";

/// Runs the synthesis loop. `on_episode` sees every log row as it is produced.
SynthesisResult synthesize(const RunConfig& config,
                           const std::function<void(const EpisodeLog&)>& on_episode = {});

struct BenchEntry {
  std::string name;
  RunConfig config;
  int repeats = 1;
};

struct BenchRow {
  std::string name;
  int runs = 0;
  int successes = 0;
  // Wall time of the successful runs, seconds.
  double avg_seconds = 0.0;
  double min_seconds = 0.0;
  double max_seconds = 0.0;
};

/// Runs every entry `repeats` times with seeds seed, seed+1, ...
std::vector<BenchRow> bench(const std::vector<BenchEntry>& entries,
                            const std::function<void(const BenchEntry&, int, const SynthesisResult&)>& on_run = {});

/// Reads a bench description:
///
///   [[run]]
///   name = "con-2-1"
///   protocol = "consensus"
///   n = 2
///   f = 1
///   rounds = 2
///   mode = "ggms"
///   repeats = 10
///
/// Optional per run: internal, seed, time_limit, max_episodes, log_dir.
std::vector<BenchEntry> load_bench_config(const std::string& path);

std::string format_bench_table(const std::vector<BenchRow>& rows);

}  // namespace protosynth
