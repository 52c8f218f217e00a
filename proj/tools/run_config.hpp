#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unimatch/losses.hpp"
#include "unimatch/model.hpp"

namespace unimatch::cli {

/// Flat key=value run configuration. Every key has a default; unknown keys
/// are rejected. An empty value for a mode-dependent key means "the mode's
/// default".
class RunConfig {
 public:
  RunConfig();

  /// Lines of "key = value"; '#' starts a comment.
  void merge_file(const std::filesystem::path& path);
  /// "key=value".
  void merge_assignment(const std::string& text);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }

  std::filesystem::path out_dir() const;
  std::filesystem::path data_dir() const;
  std::filesystem::path cache_dir() const;

  MatchingMode mode() const;
  TrainingConfig training() const;
  ShotParams shot() const;

  /// Every key with its resolved value, sorted, one per line.
  std::string resolved_text() const;
  void write_resolved(const std::filesystem::path& path) const;

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace unimatch::cli
