#include "coldstart/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "coldstart/random.hpp"

namespace coldstart {

namespace {

constexpr std::array<std::string_view, 18> kGenres = {
    "Action", "Adventure", "Animation", "Children", "Comedy",  "Crime",    "Documentary", "Drama", "Fantasy",
    "Film-Noir", "Horror", "Musical",  "Mystery",  "Romance", "Sci-Fi", "Thriller", "War", "Western"};

constexpr std::array<std::string_view, 48> kTagWords = {
    "atmospheric", "heist",     "twist",      "quirky",    "dystopia",   "space",    "revenge",   "friendship",
    "noir",        "satire",    "dark",       "visual",    "slow",       "cult",     "classic",   "gritty",
    "witty",       "surreal",   "musical",    "romantic",  "tragic",     "epic",     "historical", "biopic",
    "heartwarming", "violent",  "philosophical", "suspense", "magic",    "robots",   "zombies",   "aliens",
    "courtroom",   "sports",    "family",     "coming-of-age", "war",    "politics", "mafia",     "detective",
    "nostalgic",   "stylized",  "ensemble",   "indie",     "animated",   "remake",   "sequel",    "franchise"};

constexpr std::array<std::string_view, 40> kTitleWords = {
    "Night",  "River",   "Shadow", "Last",    "City",  "Dream",  "Silent", "Empire", "Blue",   "Storm",
    "Heart",  "Winter",  "Lost",   "Golden",  "Road",  "Fire",   "Secret", "Garden", "Iron",   "Moon",
    "Summer", "Stranger", "House", "Glass",   "Wild",  "Broken", "Star",   "Echo",   "Crimson", "Harbor",
    "Return", "Mirror",  "Edge",   "Kingdom", "Ghost", "Signal", "Paper",  "Hollow", "Northern", "Light"};

constexpr std::size_t kTagsPerCoordinate = 3;

std::uint64_t stream_seed(const WorldSpec& spec, std::string_view name) {
  return derive_seed(spec.seed, {fnv1a64(name)});
}

void unit_gaussian(Rng& rng, std::span<double> out) {
  for (;;) {
    double norm2 = 0.0;
    for (double& v : out) {
      v = rng.normal();
      norm2 += v * v;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& v : out) v *= inv;
      return;
    }
  }
}

// Orthonormal columns (rows = embed_dim, cols = latent_dim), column-major.
std::vector<double> random_projection(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> p(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    std::span<double> col(p.data() + c * rows, rows);
    for (;;) {
      for (double& v : col) v = rng.normal();
      for (std::size_t prev = 0; prev < c; ++prev) {
        std::span<const double> q(p.data() + prev * rows, rows);
        const double proj = dot(col, q);
        for (std::size_t r = 0; r < rows; ++r) col[r] -= proj * q[r];
      }
      const double norm = std::sqrt(dot(col, col));
      if (norm > 1e-8) {
        for (double& v : col) v /= norm;
        break;
      }
    }
  }
  return p;
}

std::vector<std::size_t> top_coordinates(std::span<const double> latent, std::size_t n) {
  std::vector<std::size_t> idx(latent.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) { return latent[a] != latent[b] ? latent[a] > latent[b] : a < b; });
  idx.resize(n);
  return idx;
}

std::string_view genre_for(std::size_t coord) { return kGenres[coord % kGenres.size()]; }

std::string_view tag_for(std::size_t coord, std::size_t slot) {
  return kTagWords[(coord * kTagsPerCoordinate + slot) % kTagWords.size()];
}

std::string make_id(char prefix, std::size_t index, std::size_t count) {
  std::size_t width = 5;
  for (std::size_t n = count; n >= 100000; n /= 10) ++width;
  return fmt::format("{}{:0{}}", prefix, index + 1, width);
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ValidationError("invalid world spec: " + message);
}

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void validate(const WorldSpec& s) {
  check(s.catalog_size >= 1, "catalog_size must be >= 1");
  check(s.user_count >= 1, "user_count must be >= 1");
  check(s.embed_dim >= 1, "embed_dim must be >= 1");
  check(s.latent_dim >= 1, "latent_dim must be >= 1");
  check(s.latent_dim <= s.embed_dim, "latent_dim must not exceed embed_dim");
  check(s.gt_per_user >= 1, "gt_per_user must be >= 1");
  check(s.gt_per_user <= s.catalog_size, "gt_per_user must not exceed catalog_size");
  check(std::isfinite(s.zipf_exponent) && s.zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  check(unit_interval(s.alignment), "alignment must be in [0,1]");
  check(unit_interval(s.gt_popularity_mix), "gt_popularity_mix must be in [0,1]");
  check(unit_interval(s.query_homogeneity), "query_homogeneity must be in [0,1]");
  check(std::isfinite(s.scorer_signal) && s.scorer_signal >= 0.0, "scorer_signal must be >= 0");
  check(std::isfinite(s.scorer_item_bias) && s.scorer_item_bias >= 0.0, "scorer_item_bias must be >= 0");
  check(std::isfinite(s.scorer_length_bias) && s.scorer_length_bias >= 0.0, "scorer_length_bias must be >= 0");
  check(std::isfinite(s.relevance_noise) && s.relevance_noise >= 0.0, "relevance_noise must be >= 0");
  check(std::isfinite(s.mean_popularity) && s.mean_popularity >= 0.0, "mean_popularity must be >= 0");
  check(s.export_score_depth >= 1, "export_score_depth must be >= 1");
}

WorldSpec world_spec_from_config(const ConfigSection& section, WorldSpec spec) {
  section.require_known({"catalog_size", "user_count", "embed_dim", "latent_dim", "zipf_exponent", "alignment",
                         "gt_per_user", "gt_popularity_mix", "scorer_signal", "scorer_item_bias",
                         "scorer_length_bias", "seed", "relevance_noise", "query_homogeneity", "mean_popularity",
                         "export_score_depth"});
  if (auto v = section.get_count("catalog_size")) spec.catalog_size = *v;
  if (auto v = section.get_count("user_count")) spec.user_count = *v;
  if (auto v = section.get_count("embed_dim")) spec.embed_dim = *v;
  if (auto v = section.get_count("latent_dim")) spec.latent_dim = *v;
  if (auto v = section.get_double("zipf_exponent")) spec.zipf_exponent = *v;
  if (auto v = section.get_double("alignment")) spec.alignment = *v;
  if (auto v = section.get_count("gt_per_user")) spec.gt_per_user = *v;
  if (auto v = section.get_double("gt_popularity_mix")) spec.gt_popularity_mix = *v;
  if (auto v = section.get_double("scorer_signal")) spec.scorer_signal = *v;
  if (auto v = section.get_double("scorer_item_bias")) spec.scorer_item_bias = *v;
  if (auto v = section.get_double("scorer_length_bias")) spec.scorer_length_bias = *v;
  if (auto v = section.get_u64("seed")) spec.seed = *v;
  if (auto v = section.get_double("relevance_noise")) spec.relevance_noise = *v;
  if (auto v = section.get_double("query_homogeneity")) spec.query_homogeneity = *v;
  if (auto v = section.get_double("mean_popularity")) spec.mean_popularity = *v;
  if (auto v = section.get_count("export_score_depth")) spec.export_score_depth = *v;
  validate(spec);
  return spec;
}

std::string world_spec_to_config(const WorldSpec& s) {
  std::string out = "[world]\n";
  auto line = [&](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
  line("catalog_size", s.catalog_size);
  line("user_count", s.user_count);
  line("embed_dim", s.embed_dim);
  line("latent_dim", s.latent_dim);
  line("zipf_exponent", s.zipf_exponent);
  line("alignment", s.alignment);
  line("gt_per_user", s.gt_per_user);
  line("gt_popularity_mix", s.gt_popularity_mix);
  line("scorer_signal", s.scorer_signal);
  line("scorer_item_bias", s.scorer_item_bias);
  line("scorer_length_bias", s.scorer_length_bias);
  line("seed", s.seed);
  line("relevance_noise", s.relevance_noise);
  line("query_homogeneity", s.query_homogeneity);
  line("mean_popularity", s.mean_popularity);
  line("export_score_depth", s.export_score_depth);
  return out;
}

std::span<const double> SyntheticWorld::item_latent(std::size_t item) const {
  return {item_latent_.data() + item * spec.latent_dim, spec.latent_dim};
}

std::span<const double> SyntheticWorld::user_latent(std::size_t user) const {
  return {user_latent_.data() + user * spec.latent_dim, spec.latent_dim};
}

double SyntheticWorld::affinity(std::size_t user, std::size_t item) const {
  // Latents are unit vectors, so the dot product has variance ~1/latent_dim;
  // rescale to unit variance to keep it commensurate with the popularity term.
  return std::sqrt(static_cast<double>(spec.latent_dim)) * dot(user_latent(user), item_latent(item));
}

double SyntheticWorld::relevance(std::size_t user, std::size_t item) const {
  const double mix = spec.gt_popularity_mix;
  return mix * popularity_score[item] + (1.0 - mix) * affinity(user, item);
}

double SyntheticWorld::score(std::size_t user, std::size_t item) const {
  Rng noise(derive_seed(spec.seed, {fnv1a64("score_noise"), user, item}));
  return spec.scorer_signal * relevance(user, item) + spec.scorer_item_bias * item_bias[item] +
         spec.scorer_length_bias * length_score[item] + noise.normal();
}

std::size_t SyntheticWorld::user_index(std::string_view user_id) const {
  auto it = user_index_.find(std::string(user_id));
  if (it == user_index_.end()) throw ValidationError(fmt::format("unknown synthetic user '{}'", user_id));
  return it->second;
}

std::size_t SyntheticWorld::item_index(std::string_view item_id) const {
  auto idx = catalog.index_of(item_id);
  if (!idx) throw ValidationError(fmt::format("unknown synthetic item '{}'", item_id));
  return *idx;
}

SyntheticWorld generate_world(const WorldSpec& spec) {
  validate(spec);
  const std::size_t n_items = spec.catalog_size;
  const std::size_t n_users = spec.user_count;
  const std::size_t latent = spec.latent_dim;
  const std::size_t dim = spec.embed_dim;

  SyntheticWorld world;
  world.spec = spec;

  // (1) item latents on the unit sphere
  world.item_latent_.resize(n_items * latent);
  {
    Rng rng(stream_seed(spec, "item_latent"));
    for (std::size_t i = 0; i < n_items; ++i) unit_gaussian(rng, {world.item_latent_.data() + i * latent, latent});
  }

  // (2) Zipf popularity over a random permutation, counts by inverse-CDF draws
  std::vector<std::int64_t> counts(n_items, 0);
  {
    Rng rng(stream_seed(spec, "popularity"));
    std::vector<std::size_t> perm(n_items);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n_items; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    std::vector<double> cumulative(n_items);
    double total = 0.0;
    for (std::size_t r = 0; r < n_items; ++r) {
      total += std::pow(static_cast<double>(r + 1), -spec.zipf_exponent);
      cumulative[r] = total;
    }
    const auto draws = static_cast<std::size_t>(std::llround(spec.mean_popularity * static_cast<double>(n_items)));
    for (std::size_t d = 0; d < draws; ++d) {
      const double u = rng.uniform() * total;
      auto r = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      ++counts[perm[std::min(r, n_items - 1)]];
    }
  }
  // popularity_rank_score: −s·ln(rank) by observed count, ties by catalog order
  world.popularity_score.assign(n_items, 0.0);
  {
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    for (std::size_t r = 0; r < n_items; ++r) {
      world.popularity_score[order[r]] = -spec.zipf_exponent * std::log(static_cast<double>(r + 1));
    }
  }

  // metadata text
  std::vector<Item> items(n_items);
  {
    Rng rng(stream_seed(spec, "item_text"));
    for (std::size_t i = 0; i < n_items; ++i) {
      Item& item = items[i];
      item.id = make_id('i', i, n_items);
      item.popularity = counts[i];
      const std::size_t title_words = 1 + rng.index(4);
      for (std::size_t w = 0; w < title_words; ++w) {
        if (w) item.title += ' ';
        item.title += kTitleWords[rng.index(kTitleWords.size())];
      }
      item.year = 1930 + static_cast<int>(rng.index(90));

      const auto top = top_coordinates(world.item_latent(i), 3);
      const std::size_t n_genres = 1 + rng.index(3);
      for (std::size_t g = 0; g < n_genres && g < top.size(); ++g) {
        std::string genre(genre_for(top[g]));
        if (std::find(item.genres.begin(), item.genres.end(), genre) == item.genres.end()) {
          item.genres.push_back(std::move(genre));
        }
      }
      const std::size_t n_tags = rng.index(15);
      for (std::size_t t = 0; t < n_tags; ++t) {
        std::string_view word;
        if (rng.uniform() < 0.6) {
          word = tag_for(top[rng.index(top.size())], rng.index(kTagsPerCoordinate));
        } else {
          word = kTagWords[rng.index(kTagWords.size())];
        }
        const auto count = static_cast<std::int64_t>(1 + rng.index(50));
        auto same = [&](const Tag& tag) { return tag.text == word; };
        if (std::none_of(item.tags.begin(), item.tags.end(), same)) item.tags.push_back({std::string(word), count});
      }
    }
  }
  world.catalog = Catalog(std::move(items));

  // (6, partly) scorer item parameters
  world.item_bias.resize(n_items);
  {
    Rng rng(stream_seed(spec, "item_bias"));
    for (double& b : world.item_bias) b = rng.normal();
  }
  world.length_score.resize(n_items);
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
      world.length_score[i] = static_cast<double>(tokenize(build_item_profile(world.catalog[i])).size());
      sum += world.length_score[i];
    }
    const double mean = sum / static_cast<double>(n_items);
    for (double& l : world.length_score) l = mean > 0.0 ? l / mean : 0.0;
  }

  // (3) user latents and profile texts
  world.user_latent_.resize(n_users * latent);
  world.users.resize(n_users);
  {
    Rng rng(stream_seed(spec, "user_latent"));
    Rng text(stream_seed(spec, "user_text"));
    for (std::size_t u = 0; u < n_users; ++u) {
      std::span<double> lat(world.user_latent_.data() + u * latent, latent);
      unit_gaussian(rng, lat);
      UserRecord& user = world.users[u];
      user.id = make_id('u', u, n_users);
      for (std::size_t coord : top_coordinates(lat, 3)) {
        if (!user.profile_text.empty()) user.profile_text += ' ';
        user.profile_text += lowercase(genre_for(coord));
        user.profile_text += ' ';
        user.profile_text += tag_for(coord, text.index(kTagsPerCoordinate));
      }
      world.user_index_.emplace(user.id, u);
    }
  }

  // (4) ground truth: top gt_per_user of relevance + τ·Gumbel
  {
    std::vector<std::pair<double, std::size_t>> perturbed(n_items);
    const auto k = static_cast<std::ptrdiff_t>(spec.gt_per_user);
    for (std::size_t u = 0; u < n_users; ++u) {
      Rng rng(derive_seed(spec.seed, {fnv1a64("gt"), u}));
      for (std::size_t i = 0; i < n_items; ++i) {
        perturbed[i] = {world.relevance(u, i) + spec.relevance_noise * rng.gumbel(), i};
      }
      std::partial_sort(perturbed.begin(), perturbed.begin() + k, perturbed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      for (std::ptrdiff_t j = 0; j < k; ++j) world.users[u].gt_items.insert(world.catalog[perturbed[j].second].id);
    }
  }

  // (5) retrieval embeddings through a fixed orthonormal projection
  {
    Rng proj_rng(stream_seed(spec, "projection"));
    const auto projection = random_projection(proj_rng, dim, latent);
    auto project = [&](std::span<const double> lat, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t c = 0; c < latent; ++c) {
        const double* col = projection.data() + c * dim;
        for (std::size_t r = 0; r < dim; ++r) out[r] += col[r] * lat[c];
      }
    };
    const double a = spec.alignment;
    std::vector<double> projected(dim), noise(dim), vec(dim);

    world.item_embeddings = EmbeddingSet(dim);
    Rng item_noise(stream_seed(spec, "item_noise"));
    for (std::size_t i = 0; i < n_items; ++i) {
      project(world.item_latent(i), projected);
      unit_gaussian(item_noise, noise);
      for (std::size_t r = 0; r < dim; ++r) vec[r] = a * projected[r] + (1.0 - a) * noise[r];
      world.item_embeddings.add(world.catalog[i].id, vec);
    }

    std::vector<double> common(dim);
    Rng common_rng(stream_seed(spec, "query_common"));
    unit_gaussian(common_rng, common);
    const double h = spec.query_homogeneity;
    const double own = std::sqrt(std::max(0.0, 1.0 - h * h));
    world.user_queries = EmbeddingSet(dim);
    Rng query_noise(stream_seed(spec, "query_noise"));
    for (std::size_t u = 0; u < n_users; ++u) {
      project(world.user_latent(u), projected);
      unit_gaussian(query_noise, noise);
      double norm2 = 0.0;
      for (std::size_t r = 0; r < dim; ++r) {
        noise[r] = h * common[r] + own * noise[r];
        norm2 += noise[r] * noise[r];
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t r = 0; r < dim; ++r) vec[r] = a * projected[r] + (1.0 - a) * noise[r] * inv;
      world.user_queries.add(world.users[u].id, vec);
    }
  }
  return world;
}

double synthetic_scorer(const SyntheticWorld& world, const UserRecord& user, const Item& item) {
  return world.score(world.user_index(user.id), world.item_index(item.id));
}

double SyntheticScorer::score(const UserRecord& user, const std::string& item_id) const {
  return world_->score(world_->user_index(user.id), world_->item_index(item_id));
}

ScoreTable world_score_table(const SyntheticWorld& world, std::size_t depth) {
  ScoreTable table;
  depth = std::min(depth, world.catalog.size());
  for (std::size_t u = 0; u < world.users.size(); ++u) {
    const auto& user = world.users[u];
    const auto pool = flat_search(world.user_queries.vector(u), world.item_embeddings, depth, user.id);
    for (const auto& e : pool.entries) table.set(user.id, e.item_id, world.score(u, world.item_index(e.item_id)));
  }
  return table;
}

void export_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  save_catalog(world.catalog, dir / kWorldCatalog, CatalogFormat::csv);
  save_users(world.users, dir / kWorldUsers);
  save_embeddings(world.item_embeddings, dir / kWorldEmbeddings);
  save_embeddings(world.user_queries, dir / kWorldQueries);
  save_scores(world_score_table(world, world.spec.export_score_depth), dir / kWorldScores);
  std::ofstream cfg(dir / kWorldConfig, std::ios::binary | std::ios::trunc);
  if (!cfg) throw IoError(fmt::format("cannot write '{}'", (dir / kWorldConfig).string()));
  cfg << world_spec_to_config(world.spec);
  if (!cfg.flush()) throw IoError(fmt::format("failed writing '{}'", (dir / kWorldConfig).string()));
}

}  // namespace coldstart
