#include "protosynth/json_io.hpp"

#include <algorithm>
#include <fstream>

namespace protosynth {

using nlohmann::json;

json machine_to_json(const StateMachine& machine) {
  const auto& s = machine.setting();
  json j;
  j["spec"] = machine.spec_name();
  j["setting"] = {{"n", s.n}, {"r", s.rounds}, {"f", s.f}, {"k", s.k}, {"use_proc_id", s.use_proc_id}};
  json legend = json::object();
  for (std::size_t i = 0; i < machine.space().labels().size(); ++i) {
    legend[std::to_string(i)] = machine.space().labels()[i];
  }
  j["legend"] = legend;
  json ts = json::array();
  for (const auto& [key, out] : machine.transitions()) {
    json t = {{"round", key.round}, {"own", key.own}, {"others", key.others}, {"out", out}};
    if (key.proc_id) t["proc_id"] = *key.proc_id;
    ts.push_back(std::move(t));
  }
  j["transitions"] = std::move(ts);
  return j;
}

StateMachine machine_from_json(const json& j) {
  try {
    const std::string name = j.at("spec").get<std::string>();
    const auto spec = ProtocolSpec::for_properties(parse_property_set(name));
    const auto& js = j.at("setting");
    Setting s;
    s.n = js.at("n").get<int>();
    s.rounds = js.at("r").get<int>();
    s.f = js.at("f").get<int>();
    s.k = js.at("k").get<int>();
    s.use_proc_id = js.value("use_proc_id", false);
    s.validate();
    const auto space = encode_state_space(spec, s.k);
    if (j.contains("legend")) {
      for (const auto& [id, label] : j.at("legend").items()) {
        const auto sid = static_cast<StateId>(std::stoi(id));
        if (!space.valid(sid) || space.label(sid) != label.get<std::string>()) {
          throw ConfigError("legend entry " + id + " does not match the state layout");
        }
      }
    }
    StateMachine m(spec.name, s, space);
    for (const auto& t : j.at("transitions")) {
      TransitionKey key;
      key.round = t.at("round").get<int>();
      if (t.contains("proc_id")) key.proc_id = t.at("proc_id").get<int>();
      key.own = t.at("own").get<StateId>();
      key.others = t.at("others").get<std::vector<StateId>>();
      m.set(key, t.at("out").get<StateId>());
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed machine JSON: ") + e.what());
  }
}

json scenario_to_json(const Scenario& scenario) {
  json crashes = json::array();
  for (const auto& c : scenario.crashes) {
    crashes.push_back({{"proc", c.proc}, {"round", c.round}, {"delivered_to", c.delivered_to}});
  }
  return {{"init", scenario.init}, {"crashes", crashes}};
}

Scenario scenario_from_json(const json& j) {
  try {
    Scenario sc;
    sc.init = j.at("init").get<std::vector<StateId>>();
    if (j.contains("crashes")) {
      for (const auto& c : j.at("crashes")) {
        Crash crash{c.at("proc").get<int>(), c.at("round").get<int>(),
                    c.value("delivered_to", std::vector<int>{})};
        std::sort(crash.delivered_to.begin(), crash.delivered_to.end());
        sc.crashes.push_back(std::move(crash));
      }
    }
    std::sort(sc.crashes.begin(), sc.crashes.end(),
              [](const Crash& a, const Crash& b) { return a.proc < b.proc; });
    return sc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario JSON: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace protosynth
