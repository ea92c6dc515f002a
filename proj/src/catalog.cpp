#include "coldstart/catalog.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "json.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

void sort_tags(std::vector<Tag>& tags) {
  std::sort(tags.begin(), tags.end(), [](const Tag& a, const Tag& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.text < b.text;
  });
}

Catalog::Catalog(std::vector<Item> items) : items_(std::move(items)) {
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    Item& item = items_[i];
    if (item.id.empty()) throw ValidationError(fmt::format("item at position {} has an empty id", i));
    if (item.popularity < 0) throw ValidationError(fmt::format("item '{}' has negative popularity", item.id));
    for (const Tag& tag : item.tags) {
      if (tag.count < 0) throw ValidationError(fmt::format("item '{}' has a negative tag count", item.id));
    }
    sort_tags(item.tags);
    if (!index_.emplace(item.id, i).second) {
      throw ValidationError(fmt::format("duplicate item id '{}'", item.id));
    }
  }
}

std::optional<std::size_t> Catalog::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Item& Catalog::at(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw ValidationError(fmt::format("unknown item id '{}'", id));
  return items_[*idx];
}

CatalogFormat catalog_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return CatalogFormat::csv;
  if (ext == ".jsonl" || ext == ".json") return CatalogFormat::jsonl;
  throw ValidationError(fmt::format("cannot infer catalog format from '{}'", path.string()));
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

// ---- CSV ------------------------------------------------------------------

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180 reader. Quoted fields may contain separators, doubled quotes and
// newlines. Returns false at end of input.
bool read_csv_record(std::istream& in, std::size_t& line_no, CsvRecord& record,
                     const std::string& source) {
  record.fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  record.line = line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::string field;
  bool in_quotes = false;
  std::size_t i = 0;
  for (;;) {
    if (i == line.size()) {
      if (in_quotes) {
        std::string next;
        if (!std::getline(in, next)) throw ParseError(source, record.line, "unterminated quoted field");
        ++line_no;
        if (!next.empty() && next.back() == '\r') next.pop_back();
        field.push_back('\n');
        line = std::move(next);
        i = 0;
        continue;
      }
      record.fields.push_back(std::move(field));
      return true;
    }
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!field.empty()) throw ParseError(source, record.line, "stray quote inside unquoted field");
      in_quotes = true;
    } else if (c == ',') {
      record.fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
}

std::string csv_escape(const std::string& field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string::npos ||
      (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

Item item_from_csv(const CsvRecord& rec, const std::array<std::size_t, 6>& col, const std::string& source) {
  auto field = [&](std::size_t which) -> const std::string& { return rec.fields[col[which]]; };
  Item item;
  item.id = field(0);
  item.title = field(1);
  if (!field(2).empty()) {
    auto year = parse_int<int>(field(2));
    if (!year) throw ParseError(source, rec.line, fmt::format("bad year '{}'", field(2)));
    item.year = *year;
  }
  for (auto& genre : split(field(3), '|')) {
    if (!genre.empty()) item.genres.push_back(std::move(genre));
  }
  for (const auto& pair : split(field(4), '|')) {
    if (pair.empty()) continue;
    const auto colon = pair.rfind(':');
    if (colon == std::string::npos) throw ParseError(source, rec.line, fmt::format("tag '{}' lacks ':count'", pair));
    auto count = parse_int<std::int64_t>(std::string_view(pair).substr(colon + 1));
    if (!count || *count < 0) throw ParseError(source, rec.line, fmt::format("bad tag count in '{}'", pair));
    item.tags.push_back({pair.substr(0, colon), *count});
  }
  if (!field(5).empty()) {
    auto pop = parse_int<std::int64_t>(field(5));
    if (!pop || *pop < 0) throw ParseError(source, rec.line, fmt::format("bad popularity '{}'", field(5)));
    item.popularity = *pop;
  }
  return item;
}

std::vector<Item> parse_catalog_csv(std::istream& in, const std::string& source) {
  static constexpr std::array<std::string_view, 6> kColumns = {"id", "title", "year", "genres", "tags", "popularity"};
  std::size_t line_no = 0;
  CsvRecord rec;
  if (!read_csv_record(in, line_no, rec, source)) throw ParseError(source, 1, "missing header");
  if (!rec.fields.empty() && rec.fields[0].starts_with("\xEF\xBB\xBF")) rec.fields[0].erase(0, 3);

  std::array<std::size_t, 6> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(rec.fields.begin(), rec.fields.end(), kColumns[c]);
    if (it == rec.fields.end()) throw ParseError(source, rec.line, fmt::format("header lacks column '{}'", kColumns[c]));
    col[c] = static_cast<std::size_t>(it - rec.fields.begin());
  }
  const std::size_t width = rec.fields.size();

  std::vector<Item> items;
  std::unordered_map<std::string, std::size_t> seen;
  while (read_csv_record(in, line_no, rec, source)) {
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (rec.fields.size() != width) {
      throw ParseError(source, rec.line, fmt::format("expected {} fields, found {}", width, rec.fields.size()));
    }
    Item item = item_from_csv(rec, col, source);
    if (auto [it, fresh] = seen.emplace(item.id, rec.line); !fresh) {
      throw ParseError(source, rec.line, fmt::format("duplicate item id '{}' (first seen on line {})", item.id, it->second));
    }
    items.push_back(std::move(item));
  }
  return items;
}

// ---- JSONL ------------------------------------------------------------------

Item item_from_json(const json& j, const std::string& source, std::size_t line) {
  try {
    Item item;
    item.id = j.at("id").get<std::string>();
    if (j.contains("title") && !j["title"].is_null()) item.title = j["title"].get<std::string>();
    if (j.contains("year") && !j["year"].is_null()) item.year = j["year"].get<int>();
    if (j.contains("genres") && !j["genres"].is_null()) item.genres = j["genres"].get<std::vector<std::string>>();
    if (j.contains("tags") && !j["tags"].is_null()) {
      for (const auto& pair : j["tags"]) {
        if (!pair.is_array() || pair.size() != 2) throw ParseError(source, line, "tags must be [text, count] pairs");
        item.tags.push_back({pair[0].get<std::string>(), pair[1].get<std::int64_t>()});
      }
    }
    if (j.contains("popularity") && !j["popularity"].is_null()) item.popularity = j["popularity"].get<std::int64_t>();
    return item;
  } catch (const json::exception& e) {
    throw ParseError(source, line, e.what());
  }
}

template <typename Fn>
void for_each_json_line(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    fn(j, line_no);
  }
}

std::vector<Item> parse_catalog_jsonl(std::istream& in, const std::string& source) {
  std::vector<Item> items;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_json_line(in, source, [&](const json& j, std::size_t line) {
    Item item = item_from_json(j, source, line);
    if (auto [it, fresh] = seen.emplace(item.id, line); !fresh) {
      throw ParseError(source, line, fmt::format("duplicate item id '{}' (first seen on line {})", item.id, it->second));
    }
    items.push_back(std::move(item));
  });
  return items;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

Catalog parse_catalog(std::istream& in, CatalogFormat format, const std::string& source) {
  auto items = format == CatalogFormat::csv ? parse_catalog_csv(in, source) : parse_catalog_jsonl(in, source);
  return Catalog(std::move(items));
}

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format) {
  auto in = open_input(path);
  return parse_catalog(in, format, path.string());
}

void write_catalog(const Catalog& catalog, std::ostream& out, CatalogFormat format) {
  if (format == CatalogFormat::csv) {
    out << "id,title,year,genres,tags,popularity\n";
    for (const Item& item : catalog.items()) {
      std::vector<std::string> tags;
      tags.reserve(item.tags.size());
      for (const Tag& t : item.tags) tags.push_back(fmt::format("{}:{}", t.text, t.count));
      out << csv_escape(item.id) << ',' << csv_escape(item.title) << ','
          << (item.year ? std::to_string(*item.year) : std::string()) << ','
          << csv_escape(join(item.genres, "|")) << ',' << csv_escape(join(tags, "|")) << ','
          << item.popularity << '\n';
    }
    return;
  }
  for (const Item& item : catalog.items()) {
    json j;
    j["id"] = item.id;
    j["title"] = item.title;
    j["year"] = item.year ? json(*item.year) : json(nullptr);
    j["genres"] = item.genres;
    json tags = json::array();
    for (const Tag& t : item.tags) tags.push_back(json::array({t.text, t.count}));
    j["tags"] = std::move(tags);
    j["popularity"] = item.popularity;
    out << j.dump() << '\n';
  }
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path, CatalogFormat format) {
  auto out = open_output(path);
  write_catalog(catalog, out, format);
  finish_output(out, path);
}

std::vector<UserRecord> parse_users(std::istream& in, const std::string& source) {
  std::vector<UserRecord> users;
  for_each_json_line(in, source, [&](const json& j, std::size_t line) {
    try {
      UserRecord user;
      user.id = j.at("id").get<std::string>();
      if (j.contains("profile_text") && !j["profile_text"].is_null()) user.profile_text = j["profile_text"].get<std::string>();
      if (j.contains("gt_items") && !j["gt_items"].is_null()) {
        for (const auto& id : j["gt_items"]) user.gt_items.insert(id.get<std::string>());
      }
      users.push_back(std::move(user));
    } catch (const json::exception& e) {
      throw ParseError(source, line, e.what());
    }
  });
  return users;
}

std::vector<UserRecord> load_users(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_users(in, path.string());
}

void write_users(const std::vector<UserRecord>& users, std::ostream& out) {
  for (const UserRecord& user : users) {
    json j;
    j["id"] = user.id;
    j["profile_text"] = user.profile_text;
    j["gt_items"] = std::vector<std::string>(user.gt_items.begin(), user.gt_items.end());
    out << j.dump() << '\n';
  }
}

void save_users(const std::vector<UserRecord>& users, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_users(users, out);
  finish_output(out, path);
}

MissingGtReport validate_users(std::vector<UserRecord>& users, const Catalog& catalog) {
  MissingGtReport report;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t u = 0; u < users.size(); ++u) {
    UserRecord& user = users[u];
    if (!seen.emplace(user.id, u).second) throw ValidationError(fmt::format("duplicate user id '{}'", user.id));
    std::vector<std::string> missing;
    for (auto it = user.gt_items.begin(); it != user.gt_items.end();) {
      if (catalog.contains(*it)) {
        ++it;
      } else {
        missing.push_back(*it);
        report.missing_items.insert(*it);
        it = user.gt_items.erase(it);
      }
    }
    if (!missing.empty()) report.affected.emplace_back(user.id, std::move(missing));
    if (user.gt_items.empty()) ++report.users_with_empty_gt;
  }
  report.users_checked = users.size();
  return report;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string build_item_profile(const Item& item, std::size_t max_tags) {
  std::string raw = item.title;
  for (const auto& genre : item.genres) {
    raw += ' ';
    raw += genre;
  }
  // Items built outside a Catalog may carry unsorted tags.
  const std::vector<Tag>* tags = &item.tags;
  std::vector<Tag> sorted;
  if (!std::is_sorted(item.tags.begin(), item.tags.end(), [](const Tag& a, const Tag& b) {
        return a.count != b.count ? a.count > b.count : a.text < b.text;
      })) {
    sorted = item.tags;
    sort_tags(sorted);
    tags = &sorted;
  }
  const std::size_t n = std::min(max_tags, tags->size());
  for (std::size_t i = 0; i < n; ++i) {
    raw += ' ';
    raw += (*tags)[i].text;
  }
  return normalize_whitespace(raw);
}

std::string build_pair_text(std::string_view user_profile, const Item& item) {
  return "[CLS] " + normalize_whitespace(user_profile) + " [SEP] " + build_item_profile(item) + " [SEP]";
}

}  // namespace coldstart
