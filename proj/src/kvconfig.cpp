#include "pmcqa/kvconfig.hpp"

#include <charconv>

#include "pmcqa/errors.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  return parse_string(read_file(path), path);
}

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  cfg.origin_ = origin;
  std::set<std::string> keys;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string line =
        end == std::string::npos ? text.substr(start) : text.substr(start, end - start);
    start = end == std::string::npos ? text.size() + 1 : end + 1;
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!keys.insert(key).second)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.entries_.emplace_back(std::move(key), std::move(value));
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

std::optional<std::string> KvConfig::get_string(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) {
      consumed_.insert(key);
      return v;
    }
  return std::nullopt;
}

std::string KvConfig::get_string_or(const std::string& key, const std::string& fallback) const {
  auto v = get_string(key);
  return v ? *v : fallback;
}

std::string KvConfig::require_string(const std::string& key) const {
  auto v = get_string(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *v;
}

long long KvConfig::get_int_or(const std::string& key, long long fallback) const {
  auto v = get_string(key);
  if (!v) return fallback;
  long long out = 0;
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size())
    throw ConfigError(origin_ + ": key '" + key + "' needs an integer, got '" + *v + "'");
  return out;
}

double KvConfig::get_double_or(const std::string& key, double fallback) const {
  auto v = get_string(key);
  if (!v) return fallback;
  double out = 0.0;
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size())
    throw ConfigError(origin_ + ": key '" + key + "' needs a number, got '" + *v + "'");
  return out;
}

bool KvConfig::get_bool_or(const std::string& key, bool fallback) const {
  auto v = get_string(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError(origin_ + ": key '" + key + "' needs true or false, got '" + *v + "'");
}

std::uint64_t KvConfig::get_seed_or(const std::string& key, std::uint64_t fallback) const {
  long long v = get_int_or(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(origin_ + ": key '" + key + "' needs a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

void KvConfig::finish() const {
  std::string unknown;
  for (const auto& [k, v] : entries_)
    if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + ("'" + k + "'");
  if (!unknown.empty())
    throw ConfigError(origin_ + ": unknown key(s) " + unknown);
}

}  // namespace pmcqa
