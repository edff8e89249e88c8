#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "virel/actor_critic.hpp"
#include "virel/merl.hpp"

namespace virel {

/// Malformed config text, unknown key or unparsable value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; `#` starts a comment; blank lines ignored.
KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);
/// "key=value"
std::pair<std::string, std::string> parse_override(const std::string& text);

struct ConfigKey {
  std::string name;
  std::string default_value;
};

/// Known keys and defaults of one subcommand.
std::vector<ConfigKey> config_schema(const std::string& subcommand);

/// Defaults overlaid with file entries, then overrides. Key order follows the
/// schema. Unknown keys throw ConfigError.
class ResolvedConfig {
 public:
  ResolvedConfig(const std::string& subcommand, const KeyValues& file_entries,
                 const KeyValues& overrides);

  const KeyValues& entries() const noexcept { return entries_; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

 private:
  KeyValues entries_;
};

TrainConfig train_config_from(const ResolvedConfig& cfg);
CounterexampleGrid grid_from(const ResolvedConfig& cfg);

}  // namespace virel
