#include "pmcqa/manifest.hpp"

#include <sstream>

#include "pmcqa/util.hpp"

namespace pmcqa {

void ManifestBuilder::add_input(const std::string& label, const std::string& path) {
  inputs_.push_back({label, path, "fnv1a64:" + fnv1a64_hex(read_file(path))});
}

void ManifestBuilder::set_config(const KvConfig& config) {
  config_entries_ = config.entries();
  config_origin_ = config.origin();
}

std::string ManifestBuilder::str() const {
  std::ostringstream out;
  out << "pmcqa-manifest v1\n";
  out << "subcommand = " << subcommand_ << "\n";
  out << "seed = " << seed_ << "\n";
  for (const Input& in : inputs_)
    out << "input " << in.label << " " << in.path << " " << in.hash << "\n";
  out << "[config " << (config_origin_.empty() ? "none" : config_origin_) << "]\n";
  for (const auto& [k, v] : config_entries_) out << k << " = " << v << "\n";
  return out.str();
}

void ManifestBuilder::write(const std::string& path) const { write_file(path, str()); }

}  // namespace pmcqa
