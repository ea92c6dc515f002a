#include "coldstart/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>

#include <fmt/core.h>

#include "coldstart/error.hpp"

namespace coldstart {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string describe(const std::string& section, std::string_view key) {
  return section.empty() ? std::string(key) : fmt::format("[{}] {}", section, key);
}

template <typename T>
T parse_number(std::string_view text, const std::string& section, std::string_view key, const char* what) {
  T value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ValidationError(fmt::format("{}: expected {}, got '{}'", describe(section, key), what, text));
  }
  return value;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace

std::string canonical_key(std::string_view key) {
  std::string out(trim(key));
  for (char& c : out) {
    c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool ConfigSection::has(std::string_view key) const { return get(key).has_value(); }

std::optional<std::string> ConfigSection::get(std::string_view key) const {
  const auto k = canonical_key(key);
  for (const auto& [name, value] : entries_) {
    if (name == k) return value;
  }
  return std::nullopt;
}

void ConfigSection::set(std::string key, std::string value) {
  key = canonical_key(key);
  if (has(key)) throw ValidationError(fmt::format("duplicate key {}", describe(name_, key)));
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<double> ConfigSection::get_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_number<double>(*v, name_, key, "a number");
}

std::optional<std::int64_t> ConfigSection::get_int(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_number<std::int64_t>(*v, name_, key, "an integer");
}

std::optional<std::size_t> ConfigSection::get_count(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_number<std::size_t>(*v, name_, key, "a non-negative integer");
}

std::optional<std::uint64_t> ConfigSection::get_u64(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_number<std::uint64_t>(*v, name_, key, "a non-negative integer");
}

std::optional<bool> ConfigSection::get_bool(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  const auto s = canonical_key(*v);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ValidationError(fmt::format("{}: expected a boolean, got '{}'", describe(name_, key), *v));
}

std::optional<std::vector<std::string>> ConfigSection::get_list(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return split_list(*v);
}

std::optional<std::vector<std::size_t>> ConfigSection::get_count_list(std::string_view key) const {
  auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<std::size_t> out;
  for (const auto& s : *items) out.push_back(parse_number<std::size_t>(s, name_, key, "a non-negative integer"));
  return out;
}

std::optional<std::vector<std::uint64_t>> ConfigSection::get_u64_list(std::string_view key) const {
  auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<std::uint64_t> out;
  for (const auto& s : *items) out.push_back(parse_number<std::uint64_t>(s, name_, key, "a non-negative integer"));
  return out;
}

void ConfigSection::require_known(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, value] : entries_) {
    (void)value;
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](std::string_view a) { return a == key; });
    if (!known) throw ValidationError(fmt::format("unknown config key {}", describe(name_, key)));
  }
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config config;
  config.sections_.emplace_back("");
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) throw ParseError(source, line_no, "empty section name");
      if (config.section(name)) throw ParseError(source, line_no, fmt::format("duplicate section [{}]", name));
      config.sections_.emplace_back(std::move(name));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    try {
      config.sections_.back().set(std::string(key), std::string(value));
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  return parse(in, path.string());
}

const ConfigSection* Config::section(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

const ConfigSection& Config::section_or_empty(std::string_view name) const {
  static const ConfigSection empty;
  const auto* s = section(name);
  return s ? *s : empty;
}

std::vector<const ConfigSection*> Config::sections_with_prefix(std::string_view prefix) const {
  std::vector<const ConfigSection*> out;
  for (const auto& s : sections_) {
    if (s.name().starts_with(prefix)) out.push_back(&s);
  }
  return out;
}

}  // namespace coldstart
