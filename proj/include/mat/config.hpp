#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mat {

/// Sectioned key-value run configuration. One document drives every
/// pipeline stage; unknown keys are rejected and the effective document
/// (defaults + file + --set overrides) is echoed next to every output.
class RunConfig {
 public:
  /// Effective config starting from schema defaults.
  RunConfig();

  static RunConfig load(const std::string& path);
  static RunConfig from_text(std::string_view text, const std::string& label);

  /// Apply a `section.key=value` override.
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double f64(const std::string& key) const;
  int integer(const std::string& key) const;
  uint64_t u64(const std::string& key) const;
  bool boolean(const std::string& key) const;
  /// Comma-separated values; empty string gives an empty list.
  std::vector<std::string> list(const std::string& key) const;

  /// Canonical INI echo of the effective configuration.
  std::string echo() const;

  /// All key/value pairs except the paths section (artifact-embedded
  /// provenance stays location-independent).
  std::vector<std::pair<std::string, std::string>> provenance_entries() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mat
