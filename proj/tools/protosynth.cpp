// Command-line front end: synth, verify, simulate, builtin, bench.

#include <iostream>

#include <CLI11.hpp>

#include "protosynth/json_io.hpp"
#include "protosynth/orchestrator.hpp"
#include "protosynth/properties.hpp"
#include "protosynth/simulator.hpp"
#include "protosynth/verifier.hpp"

namespace ps = protosynth;

namespace {

enum Exit { kOk = 0, kFailure = 1, kTimeout = 2, kConfig = 3 };

Exit report_counterexamples(const std::vector<ps::Counterexample>& cex) {
  for (const auto& c : cex) std::cout << ps::scenario_to_json(c.scenario).dump() << "\n";
  std::cerr << cex.size() << " counterexample(s)\n";
  return cex.empty() ? kOk : kFailure;
}

ps::Phase parse_phase(const std::string& s, const ps::Setting& setting) {
  if (s == "final") return ps::Phase::final_phase(setting);
  try {
    const int id = std::stoi(s);
    if (id < 0 || id > setting.rounds + 1) throw ps::ConfigError("phase out of range: " + s);
    return ps::Phase{id};
  } catch (const std::logic_error&) {
    throw ps::ConfigError("bad phase: " + s);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesis of synchronous crash-tolerant protocols"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "learn a state machine for a setting");
  std::string protocol = "consensus";
  std::string mode = "ggms";
  ps::RunConfig rc;
  int rounds = 0;
  synth->add_option("--protocol", protocol, "consensus or atomic-commit")->capture_default_str();
  synth->add_option("--n", rc.setting.n, "processes")->capture_default_str();
  synth->add_option("--f", rc.setting.f, "crash budget")->capture_default_str();
  synth->add_option("--rounds", rounds, "rounds (default f+1)");
  synth->add_option("--internal", rc.setting.k, "internal states")->capture_default_str();
  synth->add_flag("--proc-id", rc.setting.use_proc_id, "let transitions see the process id");
  synth->add_option("--mode", mode, "mcts, mcts-dfs or ggms")->capture_default_str();
  synth->add_option("--seed", rc.seed, "random seed")->capture_default_str();
  synth->add_option("--time-limit", rc.time_limit, "seconds (default by n)");
  synth->add_option("--max-episodes", rc.max_episodes, "stop after this many episodes");
  synth->add_option("--out", rc.machine_path, "machine JSON output");
  synth->add_option("--log", rc.log_path, "per-episode CSV");
  synth->add_option("--checkpoint", rc.checkpoint_path, "model parameters JSON");
  synth->add_flag("--no-oracle", [&rc](std::int64_t) { rc.oracle_enabled = false; },
                  "unfreeze on reward alone");
  bool quiet = false;
  synth->add_flag("--quiet", quiet, "no per-episode progress on stderr");

  // verify
  auto* verify = app.add_subcommand("verify", "check a machine against every scenario of a phase");
  std::string machine_path;
  std::string phase_name = "final";
  verify->add_option("--machine", machine_path, "machine JSON")->required();
  verify->add_option("--phase", phase_name, "final or a phase number")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "print the execution of one scenario");
  std::string scenario_path;
  simulate->add_option("--machine", machine_path, "machine JSON")->required();
  simulate->add_option("--scenario", scenario_path, "scenario JSON")->required();

  // builtin
  auto* builtin = app.add_subcommand("builtin", "print a reference machine as JSON");
  std::string builtin_name;
  ps::Setting bs;
  int builtin_rounds = 0;
  builtin->add_option("name", builtin_name, "floodset or atomic-commit")->required();
  builtin->add_option("--n", bs.n, "processes")->capture_default_str();
  builtin->add_option("--f", bs.f, "crash budget")->capture_default_str();
  builtin->add_option("--rounds", builtin_rounds, "rounds (default f+1)");
  builtin->add_option("--out", machine_path, "write to a file instead of stdout");

  // bench
  auto* benchcmd = app.add_subcommand("bench", "repeat synthesis runs and tabulate success rates");
  std::string bench_path;
  benchcmd->add_option("--config", bench_path, "bench TOML")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) {
      rc.spec = ps::ProtocolSpec::for_properties(ps::parse_property_set(protocol));
      rc.mode = ps::parse_mode(mode);
      rc.setting.rounds = rounds > 0 ? rounds : rc.setting.f + 1;
      auto progress = [quiet](const ps::EpisodeLog& e) {
        if (quiet) return;
        std::cerr << "episode " << e.episode << " phase " << e.phase << " counterexamples " << e.counterexamples
                  << " freezes " << e.freezes << " unfreezes " << e.unfreezes << " t=" << e.seconds << "s\n";
      };
      const auto result = ps::synthesize(rc, progress);
      std::cerr << ps::to_string(result.status) << " after " << result.log.size() << " episodes, "
                << result.seconds << " s\n";
      if (rc.machine_path.empty()) std::cout << ps::machine_to_json(result.machine).dump(2) << "\n";
      return result.status == ps::RunStatus::verified ? kOk : kTimeout;
    }
    if (*verify) {
      const auto machine = ps::machine_from_json(ps::read_json_file(machine_path));
      const auto spec = ps::ProtocolSpec::for_properties(ps::parse_property_set(machine.spec_name()));
      const auto phase = parse_phase(phase_name, machine.setting());
      return report_counterexamples(ps::validate(machine, spec, phase));
    }
    if (*simulate) {
      const auto machine = ps::machine_from_json(ps::read_json_file(machine_path));
      const auto spec = ps::ProtocolSpec::for_properties(ps::parse_property_set(machine.spec_name()));
      const auto scenario = ps::scenario_from_json(ps::read_json_file(scenario_path));
      const auto trace = ps::run(machine, scenario);
      std::cout << ps::format_trace(trace, machine.space());
      const auto verdict = ps::evaluate(spec, machine.space(), scenario, trace);
      if (verdict.ok()) {
        std::cout << "ok\n";
        return kOk;
      }
      std::cout << "violated:";
      for (const auto& v : verdict.violations) std::cout << " " << ps::to_string(v.property);
      std::cout << "\n";
      return kFailure;
    }
    if (*builtin) {
      bs.rounds = builtin_rounds > 0 ? builtin_rounds : bs.f + 1;
      ps::StateMachine m;
      if (builtin_name == "floodset") {
        const auto spec = ps::ProtocolSpec::consensus();
        m = ps::builtin_floodset(spec, bs, ps::encode_state_space(spec, bs.k));
      } else if (builtin_name == "atomic-commit") {
        const auto spec = ps::ProtocolSpec::atomic_commit();
        m = ps::builtin_atomic_commit(spec, bs, ps::encode_state_space(spec, bs.k));
      } else {
        throw ps::ConfigError("unknown builtin: " + builtin_name);
      }
      if (machine_path.empty()) {
        std::cout << ps::machine_to_json(m).dump(2) << "\n";
      } else {
        ps::write_json_file(machine_path, ps::machine_to_json(m));
      }
      return kOk;
    }
    if (*benchcmd) {
      const auto entries = ps::load_bench_config(bench_path);
      const auto rows = ps::bench(entries, [](const ps::BenchEntry& e, int i, const ps::SynthesisResult& r) {
        std::cerr << e.name << " run " << i << ": " << ps::to_string(r.status) << " in " << r.seconds << " s\n";
      });
      std::cout << ps::format_bench_table(rows);
      bool all = true;
      for (const auto& r : rows) all = all && r.successes == r.runs;
      return all ? kOk : kFailure;
    }
  } catch (const ps::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
