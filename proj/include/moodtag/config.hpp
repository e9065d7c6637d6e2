#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace moodtag {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value settings. Unknown keys and malformed values raise
/// InvalidArgument (ParseError with a line number for files).
class RunConfig {
 public:
  RunConfig();

  void set(std::string_view key, std::string_view value);
  /// Accepts "key=value".
  void set_assignment(std::string_view assignment);
  /// UTF-8 text, one key=value per line, '#' starts a comment.
  void parse(std::istream& in);
  void load(const std::filesystem::path& path);

  const std::string& str(std::string_view key) const;
  bool has(std::string_view key) const { return !str(key).empty(); }
  std::size_t size(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<std::size_t> size_list(std::string_view key) const;

  /// All keys in documentation order as key=value lines.
  std::string dump() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace moodtag
