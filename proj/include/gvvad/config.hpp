#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace gvvad {

enum class Provenance { default_value, file, flag };

std::string to_string(Provenance p);

/// Flat key=value configuration with a fixed key schema. Values layer as
/// defaults ← config file ← command-line flags; every key remembers where
/// its effective value came from.
class RunConfig {
 public:
  RunConfig() = default;

  /// Registers a key and its default. Re-declaring a key keeps the first.
  void declare(const std::string& key, std::string default_value);
  void declare(const std::vector<std::pair<std::string, std::string>>& keys);

  bool knows(const std::string& key) const { return index_.contains(key); }

  /// Throws ValidationError for unknown keys.
  void set(const std::string& key, std::string value, Provenance from);

  /// Parses a `key=value` file; `#` starts a comment line.
  void load_file(const std::filesystem::path& path);
  /// Applies one `key=value` override from the command line.
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  Provenance provenance(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// Comma-separated list of reals; empty value gives an empty list.
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Effective configuration in load order plus a provenance block.
  std::string resolved_text(const std::string& command) const;
  void write_resolved(const std::filesystem::path& out_dir, const std::string& command) const;

 private:
  struct Entry {
    std::string key;
    std::string value;
    Provenance from = Provenance::default_value;
  };
  const Entry& entry(const std::string& key) const;

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Reads `key=value` lines without a schema (blank and `#` lines skipped).
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path);

}  // namespace gvvad
