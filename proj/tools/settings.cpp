#include "settings.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace lpo::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string flag_name(const std::string& key) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

}  // namespace

std::map<std::string, std::string> parse_config(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

Settings::Settings(CLI::App* app) : app_(app) {
  app_->add_option("--config", config_path_, "flat key = value config file (flags override it)");
}

void Settings::declare(const std::string& key, std::optional<std::string> fallback,
                       const std::string& help, Role role) {
  Entry& e = entries_.emplace_back();
  e.key = key;
  e.fallback = std::move(fallback);
  e.role = role;
  std::string text = help;
  if (e.fallback) text += " [default: " + (e.fallback->empty() ? std::string("none") : *e.fallback) + "]";
  e.option = app_->add_option(flag_name(key), e.cli_value, text);
}

void Settings::declare_flag(const std::string& key, const std::string& help, Role role) {
  Entry& e = entries_.emplace_back();
  e.key = key;
  e.fallback = "false";
  e.role = role;
  e.is_flag = true;
  e.option = app_->add_flag(flag_name(key), e.cli_flag, help);
}

void Settings::resolve() {
  std::map<std::string, std::string> file;
  if (!config_path_.empty()) {
    std::ifstream in(config_path_, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + config_path_ + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    file = parse_config(ss.str(), config_path_);
    for (const auto& [key, value] : file) {
      const bool known = std::any_of(entries_.begin(), entries_.end(),
                                     [&](const Entry& e) { return e.key == key; });
      if (!known) throw UsageError("unknown config key '" + key + "' in " + config_path_);
    }
  }
  for (const Entry& e : entries_) {
    const bool on_cli = e.option->count() > 0;
    if (on_cli) {
      values_[e.key] = e.is_flag ? (e.cli_flag ? "true" : "false") : e.cli_value;
      defaulted_[e.key] = false;
      continue;
    }
    if (const auto it = file.find(e.key); it != file.end()) {
      values_[e.key] = it->second;
      defaulted_[e.key] = false;
      continue;
    }
    if (!config_path_.empty() && e.role == Role::parameter) {
      throw UsageError("missing config key '" + e.key + "' in " + config_path_);
    }
    if (!e.fallback) throw UsageError("missing config key '" + e.key + "' (pass " + flag_name(e.key) + ")");
    values_[e.key] = *e.fallback;
    defaulted_[e.key] = true;
  }
}

const Settings::Entry& Settings::entry(const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) return e;
  }
  throw std::logic_error("undeclared setting '" + key + "'");
}

bool Settings::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& Settings::str(const std::string& key) const {
  entry(key);
  return values_.at(key);
}

double Settings::real(const std::string& key) const {
  const std::string& v = str(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("setting '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t Settings::u64(const std::string& key) const {
  const std::string& v = str(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("setting '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t Settings::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

bool Settings::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("setting '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> Settings::reals(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw UsageError("setting '" + key + "' expects a comma-separated list of numbers");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("setting '" + key + "' is empty");
  return out;
}

void Settings::set(const std::string& key, std::string value) {
  entry(key);
  values_[key] = std::move(value);
}

bool Settings::from_default(const std::string& key) const {
  entry(key);
  return defaulted_.at(key);
}

nlohmann::ordered_json Settings::snapshot() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Entry& e : entries_) {
    if (e.role == Role::parameter) j[e.key] = values_.at(e.key);
  }
  return j;
}

}  // namespace lpo::cli
