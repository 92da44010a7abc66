#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pmcqa {

// `key = value` configuration with '#' comments. Typed getters mark keys as
// consumed; finish() rejects anything left over, so misspelled keys fail loud.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;

  std::optional<std::string> get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;

  long long get_int_or(const std::string& key, long long fallback) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::uint64_t get_seed_or(const std::string& key, std::uint64_t fallback) const;

  // All (key, value) pairs in file order, for manifests.
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  void finish() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_;
  mutable std::set<std::string> consumed_;
};

}  // namespace pmcqa
