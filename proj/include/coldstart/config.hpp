#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coldstart {

// Flat key-value configuration:
//
//   # comment
//   key = value            (top-level keys live in section "")
//   [run]
//   n-users = 500
//   seeds = 42 7 123
//   [pipeline.CE Rerank]
//   retriever = vector
//
// Keys are case-insensitive and '-' is equivalent to '_'; both are stored in
// canonical lower_snake form. Values may be wrapped in double quotes.
class ConfigSection {
 public:
  explicit ConfigSection(std::string name = {}) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  // Typed getters throw ValidationError naming section and key on bad values.
  std::optional<std::string> get_string(std::string_view key) const { return get(key); }
  std::optional<double> get_double(std::string_view key) const;
  std::optional<std::int64_t> get_int(std::string_view key) const;
  std::optional<std::size_t> get_count(std::string_view key) const;
  std::optional<std::uint64_t> get_u64(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  // Whitespace- or comma-separated list.
  std::optional<std::vector<std::string>> get_list(std::string_view key) const;
  std::optional<std::vector<std::size_t>> get_count_list(std::string_view key) const;
  std::optional<std::vector<std::uint64_t>> get_u64_list(std::string_view key) const;

  // Throws ValidationError for any key not in `allowed` (canonical names).
  void require_known(std::initializer_list<std::string_view> allowed) const;

  // Used by the parser; throws ValidationError on duplicates.
  void set(std::string key, std::string value);

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  const std::vector<ConfigSection>& sections() const { return sections_; }
  const ConfigSection* section(std::string_view name) const;
  // The named section, or an empty one.
  const ConfigSection& section_or_empty(std::string_view name) const;
  // Sections whose name starts with `prefix`, in file order.
  std::vector<const ConfigSection*> sections_with_prefix(std::string_view prefix) const;

 private:
  std::vector<ConfigSection> sections_;
};

// lower_snake form of a key: ASCII-lowercased, '-' replaced by '_'.
std::string canonical_key(std::string_view key);

}  // namespace coldstart
