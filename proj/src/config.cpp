#include "virel/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "virel/format.hpp"

namespace virel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("invalid number for " + key + ": '" + text + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("invalid non-negative integer for " + key + ": '" + text + "'");
  }
  return v;
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + text);
  std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("override has an empty key: " + text);
  return {key, trim(text.substr(eq + 1))};
}

std::vector<ConfigKey> config_schema(const std::string& subcommand) {
  if (subcommand == "train") {
    const TrainConfig d;
    return {
        {"env", "bandit"},
        {"variant", "virel"},
        {"horizon", "100"},
        {"gamma", format_double(d.gamma)},
        {"batch_size", std::to_string(d.batch_size)},
        {"net_width", std::to_string(d.net_width)},
        {"lr_q", format_double(d.lr_q)},
        {"lr_v", format_double(d.lr_v)},
        {"lr_pi", format_double(d.lr_pi)},
        {"tau", format_double(d.tau)},
        {"lambda_beta", format_double(d.lambda_beta)},
        {"adaptive_lambda", d.adaptive_lambda ? "true" : "false"},
        {"reward_scale", format_double(d.reward_scale)},
        {"n_eps_samples", std::to_string(d.n_eps_samples)},
        {"alpha", format_double(d.alpha)},
        {"steps_per_eval", std::to_string(d.steps_per_eval)},
        {"max_path_length", std::to_string(d.max_path_length)},
        {"c", format_double(d.c)},
        {"total_steps", std::to_string(d.total_steps)},
        {"warmup_steps", std::to_string(d.warmup_steps)},
        {"eval_episodes", std::to_string(d.eval_episodes)},
        {"buffer_capacity", std::to_string(d.buffer_capacity)},
        {"soft_weight", format_double(d.soft_weight)},
        {"r_avg_rate", format_double(d.r_avg_rate)},
    };
  }
  if (subcommand == "counterexample") {
    const CounterexampleGrid g;
    return {
        {"k1", join(g.k1)},
        {"gamma", join(g.gamma)},
        {"c", join(g.c)},
        {"k2", std::to_string(g.k2)},
    };
  }
  if (subcommand == "em-demo") {
    return {
        {"mdp", "counterexample"},
        {"mode", "policy_iteration"},
        {"k1", "100"},
        {"k2", "5"},
        {"gamma", "0.99"},
        {"n_states", "10"},
        {"n_actions", "4"},
        {"steps", "50"},
    };
  }
  if (subcommand == "verify") {
    return {
        {"suite", "all"},
        {"draws", "50"},
        {"dirac_trace", "false"},
    };
  }
  throw ConfigError("unknown subcommand: " + subcommand);
}

ResolvedConfig::ResolvedConfig(const std::string& subcommand, const KeyValues& file_entries,
                               const KeyValues& overrides) {
  for (const ConfigKey& k : config_schema(subcommand)) entries_.emplace_back(k.name, k.default_value);
  auto apply = [&](const KeyValues& kvs, const char* origin) {
    for (const auto& [key, value] : kvs) {
      auto it = std::find_if(entries_.begin(), entries_.end(),
                             [&](const auto& e) { return e.first == key; });
      if (it == entries_.end()) {
        throw ConfigError(std::string("unknown ") + origin + " key for " + subcommand + ": " + key);
      }
      it->second = value;
    }
  };
  apply(file_entries, "config");
  apply(overrides, "override");
}

const std::string& ResolvedConfig::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  throw ConfigError("missing config key: " + key);
}

double ResolvedConfig::get_double(const std::string& key) const { return parse_double(key, get(key)); }

std::size_t ResolvedConfig::get_size(const std::string& key) const { return parse_size(key, get(key)); }

bool ResolvedConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::vector<double> ResolvedConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(get(key), ',')) out.push_back(parse_double(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::vector<std::size_t> ResolvedConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& part : split(get(key), ',')) out.push_back(parse_size(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

TrainConfig train_config_from(const ResolvedConfig& cfg) {
  TrainConfig t;
  t.gamma = cfg.get_double("gamma");
  t.batch_size = cfg.get_size("batch_size");
  t.net_width = cfg.get_size("net_width");
  t.lr_q = cfg.get_double("lr_q");
  t.lr_v = cfg.get_double("lr_v");
  t.lr_pi = cfg.get_double("lr_pi");
  t.tau = cfg.get_double("tau");
  t.lambda_beta = cfg.get_double("lambda_beta");
  t.adaptive_lambda = cfg.get_bool("adaptive_lambda");
  t.reward_scale = cfg.get_double("reward_scale");
  t.n_eps_samples = cfg.get_size("n_eps_samples");
  t.alpha = cfg.get_double("alpha");
  t.steps_per_eval = cfg.get_size("steps_per_eval");
  t.max_path_length = cfg.get_size("max_path_length");
  t.c = cfg.get_double("c");
  t.total_steps = cfg.get_size("total_steps");
  t.warmup_steps = cfg.get_size("warmup_steps");
  t.eval_episodes = cfg.get_size("eval_episodes");
  t.buffer_capacity = cfg.get_size("buffer_capacity");
  t.soft_weight = cfg.get_double("soft_weight");
  t.r_avg_rate = cfg.get_double("r_avg_rate");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

CounterexampleGrid grid_from(const ResolvedConfig& cfg) {
  CounterexampleGrid g;
  g.k1 = cfg.get_size_list("k1");
  g.gamma = cfg.get_double_list("gamma");
  g.c = cfg.get_double_list("c");
  g.k2 = cfg.get_size("k2");
  for (std::size_t k : g.k1) {
    if (k == 0) throw ConfigError("k1 entries must be at least 1");
  }
  for (double gm : g.gamma) {
    if (!(gm >= 0.0 && gm < 1.0)) throw ConfigError("gamma entries must lie in [0, 1)");
  }
  for (double c : g.c) {
    if (!(c > 0.0)) throw ConfigError("c entries must be positive");
  }
  if (g.k2 == 0) throw ConfigError("k2 must be at least 1");
  return g;
}

}  // namespace virel
