#include "mbsim/config.hpp"

#include <algorithm>
#include <initializer_list>

#include <yaml-cpp/yaml.h>

#include "mbsim/error.hpp"
#include "mbsim/reports.hpp"

namespace mbsim {

namespace {

std::string at_line(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? "line " + std::to_string(mark.line + 1) + ": " : "";
}

[[noreturn]] void bad(const YAML::Node& node, const std::string& what) {
  throw ConfigError(at_line(node) + what);
}

void require_map(const YAML::Node& node, std::string_view what) {
  if (!node.IsMap()) bad(node, std::string(what) + " must be a mapping");
}

void only_keys(const YAML::Node& node, std::string_view section,
               std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad(kv.first, "unknown key '" + key + "' in " + std::string(section));
    }
  }
}

template <typename T>
T get(const YAML::Node& node, std::string_view what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    bad(node, "bad value for " + std::string(what));
  }
}

template <typename T>
T get_or(const YAML::Node& map, const char* key, T fallback) {
  const auto node = map[key];
  return node ? get<T>(node, key) : fallback;
}

Backlog parse_backlog(const YAML::Node& node) {
  if (node.IsScalar() && node.Scalar() == "inf") return Backlog::unbounded();
  const auto bits = get<Bits>(node, "initial_backlog");
  if (bits < 0) bad(node, "initial_backlog must be >= 0 or inf");
  return Backlog{bits};
}

std::filesystem::path resolve(const std::filesystem::path& base, const YAML::Node& node) {
  std::filesystem::path p = get<std::string>(node, "path");
  return p.is_absolute() ? p : base / p;
}

CqiModel parse_channel(const YAML::Node& node, const std::filesystem::path& base) {
  require_map(node, "channel");
  const auto model = get<std::string>(node["model"], "channel.model");
  if (model == "iid") {
    only_keys(node, "channel", {"model"});
    return IidUniformCqi{};
  }
  if (model == "random_walk") {
    only_keys(node, "channel", {"model", "step", "initial"});
    RandomWalkCqi walk;
    walk.step = get_or<int>(node, "step", walk.step);
    if (node["initial"]) walk.initial = get<int>(node["initial"], "channel.initial");
    return walk;
  }
  if (model == "trace") {
    only_keys(node, "channel", {"model", "path"});
    return CqiTraceFile{resolve(base, node["path"])};
  }
  bad(node["model"], "unknown channel model '" + model + "' (iid, random_walk, trace)");
}

TrafficModel parse_traffic(const YAML::Node& node, const std::filesystem::path& base) {
  require_map(node, "traffic");
  const auto model = get<std::string>(node["model"], "traffic.model");
  if (model == "constant") {
    only_keys(node, "traffic", {"model", "bits"});
    return ConstantTraffic{get_or<Bits>(node, "bits", 0)};
  }
  if (model == "bernoulli_burst") {
    only_keys(node, "traffic", {"model", "p", "bits"});
    return BernoulliBurstTraffic{get_or<double>(node, "p", 0.0), get_or<Bits>(node, "bits", 0)};
  }
  if (model == "trace") {
    only_keys(node, "traffic", {"model", "path"});
    return TrafficTraceFile{resolve(base, node["path"])};
  }
  bad(node["model"], "unknown traffic model '" + model + "' (constant, bernoulli_burst, trace)");
}

ScenarioConfig parse_scenario(const YAML::Node& node, const std::filesystem::path& base) {
  require_map(node, "scenario");
  only_keys(node, "scenario", {"users", "bands", "ttis", "seed", "pf_alpha", "channel", "traffic",
                               "initial_backlog", "rate_table"});
  ScenarioConfig sc;
  sc.num_users = get_or<int>(node, "users", sc.num_users);
  sc.num_bands = get_or<int>(node, "bands", sc.num_bands);
  sc.num_ttis = get_or<int>(node, "ttis", sc.num_ttis);
  sc.seed = get_or<std::uint64_t>(node, "seed", sc.seed);
  sc.pf_alpha = get_or<double>(node, "pf_alpha", sc.pf_alpha);
  if (node["channel"]) sc.cqi_model = parse_channel(node["channel"], base);
  if (node["traffic"]) sc.traffic_model = parse_traffic(node["traffic"], base);
  if (const auto q = node["initial_backlog"]) {
    if (q.IsSequence()) {
      for (const auto& item : q) sc.initial_backlog.push_back(parse_backlog(item));
    } else {
      sc.initial_backlog.assign(std::max(sc.num_users, 0), parse_backlog(q));
    }
  }
  if (const auto table = node["rate_table"]) {
    if (!table.IsSequence() || table.size() != sc.rate_table.size()) {
      bad(table, "rate_table must list 16 rates, CQI 0 to 15");
    }
    for (std::size_t c = 0; c < sc.rate_table.size(); ++c) {
      sc.rate_table[c] = get<Bits>(table[c], "rate_table");
    }
  }
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    bad(node, e.what());
  }
  return sc;
}

BackendSpec parse_backend(const YAML::Node& node) {
  BackendSpec spec;
  const YAML::Node map = node.IsScalar() ? YAML::Node(YAML::NodeType::Map) : node;
  const auto kind = node.IsScalar() ? node.Scalar() : get<std::string>(node["backend"], "backend");
  if (!node.IsScalar()) {
    require_map(node, "solver");
    only_keys(node, "solver", {"backend", "command", "timeout_ms", "max_nodes", "bb_timeout_ms"});
  }
  if (kind == "in-process") {
    spec.kind = BackendKind::kInProcess;
  } else if (kind == "external") {
    spec.kind = BackendKind::kExternal;
    spec.command = get_or<std::string>(map, "command", "");
    if (spec.command.empty()) bad(node, "external backend needs a command");
  } else if (kind == "self") {
    spec.kind = BackendKind::kSelf;
  } else {
    bad(node, "unknown backend '" + kind + "' (in-process, external, self)");
  }
  if (spec.kind != BackendKind::kExternal && map["command"]) {
    bad(map["command"], "command applies to the external backend only");
  }
  const auto timeout = get_or<std::int64_t>(map, "timeout_ms", spec.timeout.count());
  if (timeout < 0) bad(node, "timeout_ms must be >= 0");
  spec.timeout = std::chrono::milliseconds(timeout);
  spec.limits.max_nodes = get_or<std::uint64_t>(map, "max_nodes", 0);
  const auto bb_timeout = get_or<std::int64_t>(map, "bb_timeout_ms", 0);
  if (bb_timeout < 0) bad(node, "bb_timeout_ms must be >= 0");
  spec.limits.timeout = std::chrono::milliseconds(bb_timeout);
  if (spec.kind == BackendKind::kExternal) {
    try {
      validate_backend(ExternalBackend{spec.command, {}, spec.timeout, false});
    } catch (const ConfigError& e) {
      bad(node, e.what());
    }
  }
  return spec;
}

}  // namespace

SolverBackend resolve_backend(const BackendSpec& spec, const std::filesystem::path& self_binary,
                              const std::filesystem::path& workdir, bool keep_files) {
  switch (spec.kind) {
    case BackendKind::kInProcess:
      return InProcessBackend{spec.limits};
    case BackendKind::kExternal:
    case BackendKind::kSelf: {
      ExternalBackend ext = spec.kind == BackendKind::kSelf
                                ? self_exec_backend(self_binary, workdir)
                                : ExternalBackend{spec.command, workdir, spec.timeout, keep_files};
      ext.timeout = spec.timeout;
      ext.keep_files = keep_files;
      validate_backend(ext);
      return ext;
    }
  }
  throw ConfigError("unknown backend kind");
}

void RunConfig::validate() const {
  scenario.validate();
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (heuristics.empty()) throw ConfigError("at least one heuristic is required");
  for (auto kind : heuristics) {
    if (kind == SchedulerKind::kOptimal) {
      throw ConfigError("'optimal' is not a heuristic; the solver section configures it");
    }
  }
  if (bench.empty()) throw ConfigError("bench needs at least one backend");
}

ScenarioConfig RunConfig::replication(int r) const {
  ScenarioConfig sc = scenario;
  sc.seed = scenario.seed + static_cast<std::uint64_t>(r) * seed_stride;
  return sc;
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config must be a YAML mapping");
  only_keys(root, "config", {"scenario", "heuristics", "solver", "bench", "output_dir",
                             "keep_files", "replications", "seed_stride"});

  RunConfig cfg;
  if (!root["scenario"]) throw ConfigError("config needs a scenario section");
  cfg.scenario = parse_scenario(root["scenario"], base_dir);
  if (const auto h = root["heuristics"]) {
    cfg.heuristics.clear();
    auto add = [&](const YAML::Node& item) {
      try {
        cfg.heuristics.push_back(parse_scheduler_kind(get<std::string>(item, "heuristics")));
      } catch (const ConfigError& e) {
        bad(item, e.what());
      }
    };
    if (h.IsSequence()) {
      for (const auto& item : h) add(item);
    } else {
      add(h);
    }
  }
  if (const auto s = root["solver"]) cfg.solver = parse_backend(s);
  if (const auto b = root["bench"]) {
    if (!b.IsSequence()) bad(b, "bench must be a list of backends");
    cfg.bench.clear();
    for (const auto& item : b) cfg.bench.push_back(parse_backend(item));
  }
  if (const auto out = root["output_dir"]) cfg.output_dir = get<std::string>(out, "output_dir");
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;
  cfg.keep_files = get_or<bool>(root, "keep_files", false);
  cfg.replications = get_or<int>(root, "replications", 1);
  cfg.seed_stride = get_or<std::uint64_t>(root, "seed_stride", 1);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    bad(root, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const InputError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  try {
    return parse_run_config(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mbsim
