#include "probekit/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "probekit/error.hpp"

extern char** environ;

namespace probekit {

namespace {

enum class Kind { String, Integer, Float, Boolean, List };

struct KnownKey {
  const char* section;
  const char* key;
  Kind kind;
};

// Scalar settings reachable through PROBEKIT_<SECTION>_<KEY>.
constexpr KnownKey kOverridable[] = {
    {"run", "output_dir", Kind::String},         {"run", "seed", Kind::Integer},
    {"run", "workers", Kind::Integer},           {"probe", "l2_lambda", Kind::Float},
    {"probe", "tolerance", Kind::Float},         {"probe", "max_iter", Kind::Integer},
    {"probe", "standardize", Kind::Boolean},     {"probe", "n_folds", Kind::Integer},
    {"probe", "f1", Kind::String},               {"analysis", "threshold_ratio", Kind::Float},
    {"analysis", "ttest", Kind::String},         {"analysis", "scatter_statistic", Kind::String},
    {"psycholing", "order_balancing", Kind::Boolean}, {"psycholing", "paradigms", Kind::List},
};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

void apply_override(toml::table& root, const KnownKey& k, const std::string& var, const std::string& value) {
  auto* section = root[k.section].as_table();
  if (!section) {
    root.insert(k.section, toml::table{});
    section = root[k.section].as_table();
  }
  try {
    switch (k.kind) {
      case Kind::String: section->insert_or_assign(k.key, value); break;
      case Kind::Integer: {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        section->insert_or_assign(k.key, static_cast<std::int64_t>(v));
        break;
      }
      case Kind::Float: {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        section->insert_or_assign(k.key, v);
        break;
      }
      case Kind::Boolean:
        if (value == "true" || value == "1") section->insert_or_assign(k.key, true);
        else if (value == "false" || value == "0") section->insert_or_assign(k.key, false);
        else throw std::invalid_argument("expected true/false");
        break;
      case Kind::List: {
        toml::array arr;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) arr.push_back(item);
        section->insert_or_assign(k.key, std::move(arr));
        break;
      }
    }
  } catch (const std::logic_error& e) {
    throw UsageError(var + "='" + value + "': " + e.what());
  }
}

void apply_overrides(toml::table& root, const std::map<std::string, std::string>& env) {
  for (const auto& [var, value] : env) {
    constexpr std::string_view prefix = "PROBEKIT_";
    if (var.rfind(prefix, 0) != 0) continue;
    const std::string rest = var.substr(prefix.size());
    bool section_known = false, applied = false;
    for (const auto& k : kOverridable) {
      const auto sec = upper(k.section) + "_";
      if (rest.rfind(sec, 0) != 0) continue;
      section_known = true;
      if (rest.substr(sec.size()) == upper(k.key)) {
        apply_override(root, k, var, value);
        applied = true;
        break;
      }
    }
    if (section_known && !applied) throw UsageError("unknown override variable " + var);
  }
}

const toml::table* table_at(const toml::table& root, std::string_view key) {
  const auto* node = root.get(key);
  if (!node) return nullptr;
  if (!node->is_table()) throw UsageError("[" + std::string(key) + "] must be a table");
  return node->as_table();
}

template <typename T>
std::optional<T> get(const toml::table* t, std::string_view section, std::string_view key) {
  if (!t) return std::nullopt;
  const auto* node = t->get(key);
  if (!node) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) return *v;  // accepts integers too
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (node->is_integer()) return node->as_integer()->get();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (node->is_boolean()) return node->as_boolean()->get();
  } else {
    if (node->is_string()) return node->as_string()->get();
  }
  throw UsageError(std::string(section) + "." + std::string(key) + " has the wrong type");
}

void reject_unknown_keys(const toml::table* t, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!t) return;
  for (const auto& [k, v] : *t) {
    bool known = false;
    for (auto key : keys) known = known || k.str() == key;
    if (!known) throw UsageError("unknown key '" + std::string(k.str()) + "' in [" + std::string(where) + "]");
  }
}

std::string require_string(const toml::table& t, std::string_view where, std::string_view key) {
  auto v = get<std::string>(&t, where, key);
  if (!v || v->empty()) throw UsageError(std::string(where) + " needs a non-empty '" + std::string(key) + "'");
  return *v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<std::filesystem::path> optional_path(const toml::table& t, std::string_view where, std::string_view key,
                                                   const std::filesystem::path& base) {
  auto v = get<std::string>(&t, where, key);
  if (!v) return std::nullopt;
  return resolve(base, *v);
}

TaskGroup parse_task_group(const std::string& task_id, const toml::table& t) {
  const auto where = "tasks." + task_id;
  try {
    reject_unknown_keys(&t, where, {"duality", "level", "group", "language"});
    TaskGroup g;
    g.duality = parse_duality(require_string(t, where, "duality"));
    g.level = parse_level(get<std::string>(&t, where, "level").value_or(
        g.duality == Duality::Meaning ? "conceptual" : "unlabeled"));
    g.group = get<std::string>(&t, where, "group").value_or(std::string(to_string(g.level)));
    g.language = get<std::string>(&t, where, "language").value_or("en");
    if ((g.duality == Duality::Meaning) != (g.level == Level::Conceptual))
      throw UsageError(where + ": meaning tasks must be conceptual and form tasks must not be");
    return g;
  } catch (const DataError& e) {
    throw UsageError(where + ": " + e.what());
  }
}

std::map<std::string, TaskGroup> grouping_from(const toml::table& root) {
  std::map<std::string, TaskGroup> out;
  if (const auto* tasks = table_at(root, "tasks")) {
    for (const auto& [key, node] : *tasks) {
      if (!node.is_table()) throw UsageError("tasks." + std::string(key.str()) + " must be a table");
      out[std::string(key.str())] = parse_task_group(std::string(key.str()), *node.as_table());
    }
  }
  return out;
}

toml::table parse_toml(std::string_view text, std::string_view source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    throw UsageError(msg.str());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(TTestKind k) { return k == TTestKind::Welch ? "welch" : "paired"; }

std::string_view to_string(ScatterStatistic s) {
  switch (s) {
    case ScatterStatistic::LayerMean: return "layer_mean";
    case ScatterStatistic::LastLayer: return "last_layer";
    case ScatterStatistic::Peak: return "peak";
  }
  return "layer_mean";
}

const ModelEntry& RunConfig::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.name == name) return m;
  throw UsageError("no model named '" + std::string(name) + "' in the config");
}

std::string RunConfig::probe_settings() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "seed=%llu;l2_lambda=%.17g;tolerance=%.17g;max_iter=%d;standardize=%d;n_folds=%d;f1=",
                static_cast<unsigned long long>(seed), probe.logreg.l2_lambda, probe.logreg.tolerance,
                probe.logreg.max_iter, probe.standardize ? 1 : 0, probe.n_folds);
  return buf + std::string(to_string(probe.f1_mode));
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::map<std::string, std::string> probekit_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (kv.rfind("PROBEKIT_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return out;
}

std::map<std::string, TaskGroup> parse_grouping(std::string_view toml_text) {
  return grouping_from(parse_toml(toml_text, "<grouping>"));
}

std::map<std::string, TaskGroup> load_grouping(const std::filesystem::path& path) {
  return grouping_from(parse_toml(read_file(path), path.string()));
}

RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir,
                           const std::map<std::string, std::string>& env) {
  auto root = parse_toml(toml_text, "<config>");
  apply_overrides(root, env);

  RunConfig c;
  const auto* run = table_at(root, "run");
  reject_unknown_keys(run, "run", {"output_dir", "seed", "workers"});
  c.output_dir = resolve(base_dir, get<std::string>(run, "run", "output_dir").value_or("probekit_out"));
  const auto seed = get<std::int64_t>(run, "run", "seed").value_or(0);
  if (seed < 0) throw UsageError("run.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const auto workers = get<std::int64_t>(run, "run", "workers").value_or(1);
  if (workers < 1 || workers > 256) throw UsageError("run.workers must lie in [1, 256]");
  c.workers = static_cast<unsigned>(workers);

  if (const auto* node = root.get("datasets")) {
    const auto* arr = node->as_array();
    if (!arr) throw UsageError("datasets must be an array of tables ([[datasets]])");
    for (const auto& item : *arr) {
      const auto* t = item.as_table();
      if (!t) throw UsageError("datasets entries must be tables");
      reject_unknown_keys(t, "datasets", {"path", "concepts", "specs"});
      DatasetEntry d;
      d.path = resolve(base_dir, require_string(*t, "datasets", "path"));
      d.concepts = optional_path(*t, "datasets", "concepts", base_dir);
      d.specs = optional_path(*t, "datasets", "specs", base_dir);
      c.datasets.push_back(std::move(d));
    }
  }

  std::set<std::string> names;
  if (const auto* node = root.get("models")) {
    const auto* arr = node->as_array();
    if (!arr) throw UsageError("models must be an array of tables ([[models]])");
    for (const auto& item : *arr) {
      const auto* t = item.as_table();
      if (!t) throw UsageError("models entries must be tables");
      reject_unknown_keys(t, "models", {"name", "store", "token_scores", "continuation_scores", "prompt_wrapper"});
      ModelEntry m;
      m.name = require_string(*t, "models", "name");
      if (m.name.find_first_of("/\\:") != std::string::npos || m.name == "." || m.name == "..")
        throw UsageError("model name '" + m.name + "' cannot be used as a file name");
      if (!names.insert(m.name).second) throw UsageError("duplicate model name '" + m.name + "'");
      m.store = resolve(base_dir, require_string(*t, "models", "store"));
      m.token_scores = optional_path(*t, "models", "token_scores", base_dir);
      m.continuation_scores = optional_path(*t, "models", "continuation_scores", base_dir);
      m.prompt_wrapper = get<std::string>(t, "models", "prompt_wrapper").value_or("{prompt}");
      if (m.prompt_wrapper.find("{prompt}") == std::string::npos)
        throw UsageError("models.prompt_wrapper of '" + m.name + "' must contain {prompt}");
      c.models.push_back(std::move(m));
    }
  }

  const auto* probe = table_at(root, "probe");
  reject_unknown_keys(probe, "probe", {"l2_lambda", "tolerance", "max_iter", "standardize", "n_folds", "f1"});
  c.probe.logreg.l2_lambda = get<double>(probe, "probe", "l2_lambda").value_or(1.0);
  c.probe.logreg.tolerance = get<double>(probe, "probe", "tolerance").value_or(1e-6);
  c.probe.logreg.max_iter = static_cast<int>(get<std::int64_t>(probe, "probe", "max_iter").value_or(1000));
  c.probe.standardize = get<bool>(probe, "probe", "standardize").value_or(true);
  c.probe.n_folds = static_cast<int>(get<std::int64_t>(probe, "probe", "n_folds").value_or(5));
  try {
    c.probe.f1_mode = parse_f1_mode(get<std::string>(probe, "probe", "f1").value_or("binary"));
  } catch (const std::exception& e) {
    throw UsageError(std::string("probe.f1: ") + e.what());
  }
  if (!(c.probe.logreg.l2_lambda >= 0.0)) throw UsageError("probe.l2_lambda must be >= 0");
  if (!(c.probe.logreg.tolerance > 0.0)) throw UsageError("probe.tolerance must be > 0");
  if (c.probe.logreg.max_iter < 1) throw UsageError("probe.max_iter must be >= 1");
  if (c.probe.n_folds < 2) throw UsageError("probe.n_folds must be >= 2");

  const auto* analysis = table_at(root, "analysis");
  reject_unknown_keys(analysis, "analysis", {"threshold_ratio", "ttest", "scatter_statistic", "compare"});
  c.analysis.threshold_ratio = get<double>(analysis, "analysis", "threshold_ratio").value_or(0.95);
  if (!(c.analysis.threshold_ratio > 0.0 && c.analysis.threshold_ratio <= 1.0))
    throw UsageError("analysis.threshold_ratio must lie in (0, 1]");
  const auto ttest = get<std::string>(analysis, "analysis", "ttest").value_or("welch");
  if (ttest == "welch") c.analysis.ttest = TTestKind::Welch;
  else if (ttest == "paired") c.analysis.ttest = TTestKind::Paired;
  else throw UsageError("analysis.ttest must be 'welch' or 'paired'");
  const auto scatter = get<std::string>(analysis, "analysis", "scatter_statistic").value_or("layer_mean");
  if (scatter == "layer_mean") c.analysis.scatter_statistic = ScatterStatistic::LayerMean;
  else if (scatter == "last_layer") c.analysis.scatter_statistic = ScatterStatistic::LastLayer;
  else if (scatter == "peak") c.analysis.scatter_statistic = ScatterStatistic::Peak;
  else throw UsageError("analysis.scatter_statistic must be layer_mean, last_layer or peak");
  if (analysis) {
    if (const auto* node = analysis->get("compare")) {
      const auto* arr = node->as_array();
      if (!arr) throw UsageError("analysis.compare must be an array of tables");
      for (const auto& item : *arr) {
        const auto* t = item.as_table();
        if (!t) throw UsageError("analysis.compare entries must be tables");
        reject_unknown_keys(t, "analysis.compare", {"a", "b"});
        ModelComparison cmp{require_string(*t, "analysis.compare", "a"), require_string(*t, "analysis.compare", "b")};
        if (!names.count(cmp.a) || !names.count(cmp.b))
          throw UsageError("analysis.compare names an unknown model (" + cmp.a + ", " + cmp.b + ")");
        c.analysis.compare.push_back(std::move(cmp));
      }
    }
  }

  const auto* psy = table_at(root, "psycholing");
  reject_unknown_keys(psy, "psycholing", {"order_balancing", "paradigms"});
  c.psycholing.order_balancing = get<bool>(psy, "psycholing", "order_balancing").value_or(true);
  if (psy) {
    if (const auto* node = psy->get("paradigms")) {
      const auto* arr = node->as_array();
      if (!arr) throw UsageError("psycholing.paradigms must be an array");
      c.psycholing.direct = c.psycholing.meta = false;
      for (const auto& item : *arr) {
        const auto v = item.value<std::string>();
        if (v == "direct") c.psycholing.direct = true;
        else if (v == "meta") c.psycholing.meta = true;
        else throw UsageError("psycholing.paradigms accepts 'direct' and 'meta'");
      }
    }
  }

  if (const auto* grouping = table_at(root, "grouping")) {
    reject_unknown_keys(grouping, "grouping", {"file"});
    if (auto file = get<std::string>(grouping, "grouping", "file")) c.grouping = load_grouping(resolve(base_dir, *file));
  }
  for (auto& [task, group] : grouping_from(root)) c.grouping[task] = group;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto c = parse_run_config(read_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(),
                            probekit_environment());
  c.config_path = path;
  return c;
}

}  // namespace probekit
