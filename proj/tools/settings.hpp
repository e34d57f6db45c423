#pragma once

// Per-command settings resolved from three layers: command-line flags, an
// optional flat `key = value` config file, and built-in defaults. Flags win
// over the file, the file wins over defaults. A config file must be a
// complete run description: every non-path key of the command has to appear
// in it unless the same key is given as a flag.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace lpo::cli {

/// Usage or configuration problem; the process exits with status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
std::map<std::string, std::string> parse_config(const std::string& text, const std::string& origin);

class Settings {
 public:
  enum class Role { parameter, path };

  explicit Settings(CLI::App* app);

  /// Adds `--key-with-dashes`. No fallback makes the key required.
  void declare(const std::string& key, std::optional<std::string> fallback, const std::string& help,
               Role role = Role::parameter);
  void declare_flag(const std::string& key, const std::string& help, Role role = Role::parameter);

  /// Merges flags, the config file named by --config (if any) and defaults.
  /// Throws UsageError naming the first missing or unknown key.
  void resolve();

  bool has(const std::string& key) const;
  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

  /// Changes a resolved value (used for loss-dependent defaults).
  void set(const std::string& key, std::string value);
  bool from_default(const std::string& key) const;

  /// Resolved parameter values in declaration order.
  nlohmann::ordered_json snapshot() const;
  const std::string& config_path() const { return config_path_; }

 private:
  struct Entry {
    std::string key;
    std::optional<std::string> fallback;
    Role role;
    bool is_flag = false;
    std::string cli_value;
    bool cli_flag = false;
    CLI::Option* option = nullptr;
  };

  const Entry& entry(const std::string& key) const;

  CLI::App* app_;
  std::string config_path_;
  std::deque<Entry> entries_;  // stable addresses for CLI11 bindings
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> defaulted_;
};

}  // namespace lpo::cli
