#include <toml.hpp>

#include "protosynth/orchestrator.hpp"

namespace protosynth {

namespace {

template <typename T>
T get_or(const toml::table& t, std::string_view key, T fallback) {
  if (auto v = t[key].value<T>()) return *v;
  return fallback;
}

}  // namespace

std::vector<BenchEntry> load_bench_config(const std::string& path) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + std::string(e.description()));
  }
  const toml::array* runs = root["run"].as_array();
  if (runs == nullptr) throw ConfigError(path + ": expected [[run]] tables");

  std::vector<BenchEntry> entries;
  for (const auto& node : *runs) {
    const toml::table* t = node.as_table();
    if (t == nullptr) throw ConfigError(path + ": [[run]] entries must be tables");
    BenchEntry e;
    RunConfig& c = e.config;
    c.spec = ProtocolSpec::for_properties(parse_property_set(get_or<std::string>(*t, "protocol", "consensus")));
    c.setting.n = static_cast<int>(get_or<std::int64_t>(*t, "n", 2));
    c.setting.f = static_cast<int>(get_or<std::int64_t>(*t, "f", 1));
    c.setting.rounds = static_cast<int>(get_or<std::int64_t>(*t, "rounds", c.setting.f + 1));
    c.setting.k = static_cast<int>(get_or<std::int64_t>(*t, "internal", 2));
    c.mode = parse_mode(get_or<std::string>(*t, "mode", "ggms"));
    c.seed = static_cast<std::uint64_t>(get_or<std::int64_t>(*t, "seed", 1));
    c.time_limit = get_or<double>(*t, "time_limit", 0.0);
    c.max_episodes = static_cast<long>(get_or<std::int64_t>(*t, "max_episodes", 0));
    e.repeats = static_cast<int>(get_or<std::int64_t>(*t, "repeats", 1));
    e.name = get_or<std::string>(*t, "name", std::string(to_string(c.spec.properties)) + "-" +
                                                 std::to_string(c.setting.n) + "-" +
                                                 std::to_string(c.setting.f) + "-" +
                                                 std::string(to_string(c.mode)));
    const std::string log_dir = get_or<std::string>(*t, "log_dir", "");
    if (!log_dir.empty()) c.log_path = log_dir + "/" + e.name;
    if (e.repeats < 0) throw ConfigError(path + ": repeats must not be negative");
    c.validate();
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace protosynth
