#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmcqa/kvconfig.hpp"

namespace pmcqa {

// Run manifest: the subcommand, the seed, the resolved configuration and a
// content hash per input file. Two runs with identical manifests read
// identical bytes under identical settings and therefore write identical
// artifacts.
class ManifestBuilder {
 public:
  ManifestBuilder(const std::string& subcommand, std::uint64_t seed)
      : subcommand_(subcommand), seed_(seed) {}

  void add_input(const std::string& label, const std::string& path);
  void set_config(const KvConfig& config);

  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::string subcommand_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, std::string>> config_entries_;
  std::string config_origin_;
  struct Input {
    std::string label;
    std::string path;
    std::string hash;
  };
  std::vector<Input> inputs_;
};

}  // namespace pmcqa
