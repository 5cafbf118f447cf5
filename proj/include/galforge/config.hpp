#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace galforge {

// Flat dotted-key configuration. Every key exists in the defaults table; a
// key outside it is a usage error. Precedence: defaults < file < flags.
class Config {
 public:
  static Config defaults();

  // documented default for every key, as "key = value" lines sorted by key
  static std::string defaults_help();

  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  // "key=value" as given on the command line
  void set_override(const std::string& spec);

  bool known(const std::string& key) const;
  // true once the key was set by file or flag, as opposed to its default
  bool explicitly_set(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // comma- or space-separated unsigned integers
  std::vector<std::uint64_t> get_u64_list(const std::string& key) const;

  // resolved keys as sorted "key = value" lines
  std::string echo() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

}  // namespace galforge
