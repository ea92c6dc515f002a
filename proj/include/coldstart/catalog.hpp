#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coldstart {

struct Tag {
  std::string text;
  std::int64_t count = 0;

  friend bool operator==(const Tag&, const Tag&) = default;
};

// Orders tags by descending count, then lexicographically by text.
void sort_tags(std::vector<Tag>& tags);

struct Item {
  std::string id;
  std::string title;
  std::optional<int> year;
  std::vector<std::string> genres;
  std::vector<Tag> tags;  // kept sorted by sort_tags()
  std::int64_t popularity = 0;

  friend bool operator==(const Item&, const Item&) = default;
};

using GtSet = std::set<std::string>;

struct UserRecord {
  std::string id;
  std::string profile_text;
  GtSet gt_items;

  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

// Immutable, id-indexed item collection. Construction validates id uniqueness
// and normalizes tag order, so every Catalog in the program satisfies the Item
// invariants.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<Item> items);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Item>& items() const { return items_; }
  const Item& operator[](std::size_t index) const { return items_[index]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  bool contains(std::string_view id) const { return index_of(id).has_value(); }
  // Throws ValidationError for unknown ids.
  const Item& at(std::string_view id) const;

  friend bool operator==(const Catalog& a, const Catalog& b) { return a.items_ == b.items_; }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CatalogFormat { csv, jsonl };

// Picks the format from the file extension (.csv / .jsonl / .json).
CatalogFormat catalog_format_for(const std::filesystem::path& path);

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format);
Catalog parse_catalog(std::istream& in, CatalogFormat format, const std::string& source = "<stream>");
void save_catalog(const Catalog& catalog, const std::filesystem::path& path, CatalogFormat format);
void write_catalog(const Catalog& catalog, std::ostream& out, CatalogFormat format);

std::vector<UserRecord> load_users(const std::filesystem::path& path);
std::vector<UserRecord> parse_users(std::istream& in, const std::string& source = "<stream>");
void save_users(const std::vector<UserRecord>& users, const std::filesystem::path& path);
void write_users(const std::vector<UserRecord>& users, std::ostream& out);

// Ground-truth references that did not resolve against the catalog.
struct MissingGtReport {
  // user id -> missing item ids, in user order
  std::vector<std::pair<std::string, std::vector<std::string>>> affected;
  std::set<std::string> missing_items;
  std::size_t users_checked = 0;
  std::size_t users_with_empty_gt = 0;  // after removal

  std::size_t affected_users() const { return affected.size(); }
};

// Drops GT ids that are not in the catalog and records them. Users are kept
// even if their GT set becomes empty. Also rejects duplicate user ids.
MissingGtReport validate_users(std::vector<UserRecord>& users, const Catalog& catalog);

// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

constexpr std::size_t kDefaultProfileTags = 10;

// "{title} {genres...} {top tags...}", whitespace-normalized. Year is not part
// of the profile.
std::string build_item_profile(const Item& item, std::size_t max_tags = kDefaultProfileTags);

// "[CLS] {profile} [SEP] {item profile} [SEP]". The user profile is
// whitespace-normalized before substitution; an empty profile leaves its slot
// empty ("[CLS]  [SEP] ..."). This is the byte-exact string the model adapter
// must reproduce.
std::string build_pair_text(std::string_view user_profile, const Item& item);

}  // namespace coldstart
