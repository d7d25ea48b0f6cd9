#include "par/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "par/errors.hpp"
#include "par/ops.hpp"
#include "par/optim.hpp"

namespace par {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void normalize(std::vector<double>& v) {
  const double norm = std::sqrt(dot(v, v));
  if (norm > 0.0)
    for (auto& x : v) x /= norm;
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim, double scale = 1.0) {
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng, 0.0, scale);
  return v;
}

std::size_t uniform_index(Rng& rng, std::size_t count) {
  return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
}

/// First `take` entries of a seeded shuffle of 0..count-1.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t count, std::size_t take) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < take; ++k) std::swap(idx[k], idx[k + uniform_index(rng, count - k)]);
  idx.resize(take);
  return idx;
}

std::vector<std::size_t> argsort_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::uint64_t page_noise_seed(std::uint64_t seed, std::size_t page) { return derive_seed(seed, 2 * page + 1); }

std::vector<double> ranker_features(const Catalog& catalog, std::span<const double> user,
                                    std::span<const std::int64_t> items) {
  const std::size_t d = catalog.dim;
  std::vector<double> x(items.size() * 3 * d);
  for (std::size_t r = 0; r < items.size(); ++r) {
    auto e = catalog.embedding_of(items[r]);
    double* row = x.data() + r * 3 * d;
    for (std::size_t k = 0; k < d; ++k) {
      row[k] = e[k];
      row[d + k] = user[k];
      row[2 * d + k] = e[k] * user[k];
    }
  }
  return x;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t Catalog::theme_of(std::int64_t id) const {
  if (id <= 0 || static_cast<std::size_t>(id) >= vocab()) throw DataError("item id " + std::to_string(id) + " is not in the catalog");
  return (static_cast<std::size_t>(id) - 1) / items_per_theme;
}

std::span<const double> Catalog::embedding_of(std::int64_t id) const {
  theme_of(id);
  return {embedding.data() + static_cast<std::size_t>(id) * dim, dim};
}

double affinity(const Catalog& catalog, std::size_t user, std::int64_t item, const DataConfig& config) {
  return dot(catalog.user_latent.at(user), catalog.embedding_of(item)) +
         config.quality_weight * catalog.quality[static_cast<std::size_t>(item)];
}

Catalog make_catalog(const DataConfig& config, std::size_t history_len, std::uint64_t seed) {
  if (config.num_themes == 0 || config.items_per_theme == 0 || config.latent_dim == 0)
    throw ConfigError("catalog needs themes, items and a latent dimension");
  Rng rng(seed);
  Catalog cat;
  cat.num_themes = config.num_themes;
  cat.items_per_theme = config.items_per_theme;
  cat.dim = config.latent_dim;
  const std::size_t d = cat.dim;
  const double jitter = config.theme_spread / std::sqrt(static_cast<double>(d));

  cat.embedding.assign(cat.vocab() * d, 0.0);
  cat.quality.assign(cat.vocab(), 0.0);
  for (std::size_t th = 0; th < cat.num_themes; ++th) {
    auto centre = gaussian_vector(rng, d);
    normalize(centre);
    for (std::size_t k = 0; k < cat.items_per_theme; ++k) {
      auto e = gaussian_vector(rng, d, jitter);
      for (std::size_t c = 0; c < d; ++c) e[c] += centre[c];
      normalize(e);
      const auto id = static_cast<std::size_t>(cat.item_id(th, k));
      std::copy(e.begin(), e.end(), cat.embedding.begin() + static_cast<std::ptrdiff_t>(id * d));
      cat.quality[id] = normal(rng);
    }
  }

  const std::size_t min_len = (history_len + 1) / 2;
  for (std::size_t u = 0; u < config.num_users; ++u) {
    auto latent = gaussian_vector(rng, d);
    normalize(latent);
    cat.user_latent.push_back(latent);
    cat.user_themes.push_back(sample_without_replacement(rng, cat.num_themes, config.user_themes));
  }
  for (std::size_t u = 0; u < config.num_users; ++u) {
    const std::size_t len = min_len + uniform_index(rng, history_len - min_len + 1);
    std::vector<std::int64_t> hist;
    for (std::size_t h = 0; h < len; ++h) {
      const std::size_t th = cat.user_themes[u][uniform_index(rng, config.user_themes)];
      const auto picks = sample_without_replacement(rng, cat.items_per_theme, std::min<std::size_t>(5, cat.items_per_theme));
      std::int64_t best = cat.item_id(th, picks[0]);
      for (auto k : picks) {
        const auto id = cat.item_id(th, k);
        if (affinity(cat, u, id, config) > affinity(cat, u, best, config)) best = id;
      }
      hist.push_back(best);
    }
    cat.user_history.push_back(std::move(hist));
  }
  return cat;
}

std::vector<PageRecord> generate_pages(const Catalog& catalog, const DataConfig& config, std::size_t n,
                                       std::size_t m, std::uint64_t seed) {
  if (catalog.num_themes < n) throw DataError("catalog has fewer themes than lists per page");
  if (catalog.items_per_theme < m) {
    throw DataError("theme pool of " + std::to_string(catalog.items_per_theme) + " items is smaller than list length " +
                    std::to_string(m));
  }
  if (config.pos_per_list > m) throw DataError("more relevant items per list than slots");
  const std::size_t total = config.train_pages + config.test_pages;
  std::vector<PageRecord> pages(total);
  for (std::size_t p = 0; p < total; ++p) {
    Rng rng(derive_seed(seed, p));
    PageRecord& page = pages[p];
    page.user = uniform_index(rng, catalog.user_latent.size());
    page.split = p < config.train_pages ? "train" : "test";
    page.history = catalog.user_history[page.user];
    for (auto id : page.history) page.history_themes.push_back(catalog.theme_of(id));

    std::vector<std::size_t> themes = catalog.user_themes[page.user];
    std::shuffle(themes.begin(), themes.end(), rng);
    if (themes.size() > n) themes.resize(n);
    while (themes.size() < n) {
      const std::size_t th = uniform_index(rng, catalog.num_themes);
      if (std::find(themes.begin(), themes.end(), th) == themes.end()) themes.push_back(th);
    }

    for (std::size_t i = 0; i < n; ++i) {
      ListRecord list;
      list.theme = themes[i];
      std::vector<double> score;
      for (auto k : sample_without_replacement(rng, catalog.items_per_theme, m)) {
        const auto id = catalog.item_id(list.theme, k);
        list.items.push_back(id);
        score.push_back(affinity(catalog, page.user, id, config) + normal(rng, 0.0, config.relevance_noise));
      }
      const auto order = argsort_desc(score);
      list.rel.assign(m, 0);
      for (std::size_t k = 0; k < config.pos_per_list; ++k) list.rel[order[k]] = 1;
      list.init_order.resize(m);
      std::iota(list.init_order.begin(), list.init_order.end(), 0);
      list.clicks.assign(m, 0);
      list.probs.assign(m, 0.0);
      page.lists.push_back(std::move(list));
    }
  }
  return pages;
}

std::vector<double> InitialRanker::score(const Catalog& catalog, std::span<const double> user,
                                         std::span<const std::int64_t> items) const {
  NoGradGuard guard;
  const std::size_t width = 3 * catalog.dim;
  Tensor x = Tensor::from({items.size(), width}, ranker_features(catalog, user, items));
  const Tensor y = net.forward(x);
  return {y.values().begin(), y.values().end()};
}

std::vector<double> noisy_user(const Catalog& catalog, std::size_t user, double noise, std::uint64_t seed) {
  Rng rng(seed);
  auto v = catalog.user_latent.at(user);
  const double scale = noise / std::sqrt(static_cast<double>(catalog.dim));
  for (auto& x : v) x += normal(rng, 0.0, scale);
  return v;
}

std::vector<InitialRanker> train_initial_rankers(const std::vector<PageRecord>& pages, const Catalog& catalog,
                                                 const DataConfig& config, std::size_t n, std::uint64_t seed) {
  const std::size_t width = 3 * catalog.dim;
  std::vector<InitialRanker> rankers(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 2 * (1000 + i)));
    InitialRanker& ranker = rankers[i];
    ranker.net = make_mlp(ranker.params, "ranker", width, {config.ranker_hidden, 1}, false, rng);

    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t p = 0; p < pages.size(); ++p) {
      if (pages[p].split != "train" || i >= pages[p].lists.size()) continue;
      const auto& list = pages[p].lists[i];
      const auto user = noisy_user(catalog, pages[p].user, config.init_noise, page_noise_seed(seed, p));
      const auto feats = ranker_features(catalog, user, list.items);
      x.insert(x.end(), feats.begin(), feats.end());
      for (int r : list.rel) {
        const bool flip = uniform(rng, 0.0, 1.0) < config.label_noise;
        y.push_back(flip ? 1.0 - r : static_cast<double>(r));
      }
    }
    const std::size_t rows = y.size();
    if (rows == 0) continue;

    auto params = ranker.params.tensors();
    AdamState state(AdamConfig{.lr = config.ranker_lr}, params);
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = 64;
    for (std::size_t epoch = 0; epoch < config.ranker_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < rows; start += batch) {
        const std::size_t count = std::min(batch, rows - start);
        std::vector<double> bx(count * width), by(count), ones(count, 1.0);
        for (std::size_t r = 0; r < count; ++r) {
          const std::size_t src = order[start + r];
          std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(src * width), width, bx.begin() + static_cast<std::ptrdiff_t>(r * width));
          by[r] = y[src];
        }
        Tensor pred = reshape(sigmoid(ranker.net.forward(Tensor::from({count, width}, std::move(bx)))), {count});
        Tensor loss = bce_loss(pred, by, ones);
        for (auto& t : params) t.zero_grad();
        loss.backward();
        adam_step(params, state);
      }
    }
  }
  return rankers;
}

void apply_initial_ranking(std::vector<PageRecord>& pages, const std::vector<InitialRanker>& rankers,
                           const Catalog& catalog, const DataConfig& config, std::uint64_t seed) {
  if (rankers.empty()) throw ContractError("apply_initial_ranking needs at least one ranker");
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const auto user = noisy_user(catalog, pages[p].user, config.init_noise, page_noise_seed(seed, p));
    for (std::size_t i = 0; i < pages[p].lists.size(); ++i) {
      auto& list = pages[p].lists[i];
      const auto scores = rankers[i % rankers.size()].score(catalog, user, list.items);
      list.init_order = argsort_desc(scores);
    }
  }
}

double decay_factor(std::size_t pos, std::size_t list, const OracleConfig& config) {
  if (pos == 0 || list == 0) throw ContractError("decay_factor takes 1-based positions");
  return std::pow(static_cast<double>(pos), -config.eta1) * std::pow(static_cast<double>(list), -config.eta2);
}

double dissimilarity(const PageLayout& layout, const Catalog& catalog,
                     const std::vector<std::vector<std::int64_t>>& shown, std::size_t list, std::size_t pos) {
  const auto id = shown.at(list).at(pos);
  const auto here = layout.coord(list, pos);
  std::vector<double> mean(catalog.dim, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < shown.size(); ++i) {
    for (std::size_t k = 0; k < shown[i].size(); ++k) {
      if (shown[i][k] == 0 || !layout.is_real(i, k)) continue;
      const auto c = layout.coord(i, k);
      if (std::abs(c.row - here.row) + std::abs(c.col - here.col) != 1) continue;
      auto e = catalog.embedding_of(shown[i][k]);
      for (std::size_t d = 0; d < catalog.dim; ++d) mean[d] += e[d];
      ++count;
    }
  }
  const double norm = std::sqrt(dot(mean, mean));
  if (count == 0 || norm == 0.0) return 1.0;
  auto e = catalog.embedding_of(id);
  const double cosine = dot(e, mean) / (norm * std::sqrt(dot(e, e)));
  return std::clamp(1.0 - cosine, 0.0, 1.0);
}

std::vector<double> oracle_click_prob(const PageLayout& layout, const Catalog& catalog,
                                      const std::vector<std::vector<std::int64_t>>& shown,
                                      const std::vector<std::vector<int>>& shown_rel, const OracleConfig& config) {
  const std::size_t n = layout.num_lists(), m = layout.max_len();
  if (shown.size() != n || shown_rel.size() != n) throw DimensionError("page has a different list count than its layout");
  std::vector<double> probs(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (shown[i].size() > layout.list_len(i) || shown_rel[i].size() != shown[i].size())
      throw DimensionError("list " + std::to_string(i) + " does not fit its layout");
    for (std::size_t k = 0; k < shown[i].size(); ++k) {
      if (shown[i][k] == 0 || shown_rel[i][k] == 0) continue;
      const double p = shown_rel[i][k] * decay_factor(k + 1, i + 1, config) * dissimilarity(layout, catalog, shown, i, k);
      probs[i * m + k] = std::clamp(p, 0.0, 1.0);
    }
  }
  return probs;
}

std::vector<int> sample_clicks(std::span<const double> probs, Rng& rng) {
  std::vector<int> clicks(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) clicks[k] = uniform(rng, 0.0, 1.0) < probs[k] ? 1 : 0;
  return clicks;
}

void display(const PageRecord& page, const std::vector<std::vector<std::size_t>>& order,
             std::vector<std::vector<std::int64_t>>& shown, std::vector<std::vector<int>>& shown_rel) {
  shown.assign(page.lists.size(), {});
  shown_rel.assign(page.lists.size(), {});
  for (std::size_t i = 0; i < page.lists.size(); ++i) {
    const auto& list = page.lists[i];
    for (auto c : order.at(i)) {
      if (c >= list.items.size()) continue;
      shown[i].push_back(list.items[c]);
      shown_rel[i].push_back(list.rel[c]);
    }
  }
}

void simulate_clicks(std::vector<PageRecord>& pages, const PageLayout& layout, const Catalog& catalog,
                     const OracleConfig& oracle, std::uint64_t seed) {
  const std::size_t m = layout.max_len();
  for (std::size_t p = 0; p < pages.size(); ++p) {
    auto& page = pages[p];
    std::vector<std::vector<std::size_t>> order;
    for (const auto& list : page.lists) order.push_back(list.init_order);
    std::vector<std::vector<std::int64_t>> shown;
    std::vector<std::vector<int>> shown_rel;
    display(page, order, shown, shown_rel);
    const auto probs = oracle_click_prob(layout, catalog, shown, shown_rel, oracle);
    Rng rng(derive_seed(seed, p));
    const auto clicks = sample_clicks(probs, rng);
    for (std::size_t i = 0; i < page.lists.size(); ++i) {
      auto& list = page.lists[i];
      list.probs.assign(list.items.size(), 0.0);
      list.clicks.assign(list.items.size(), 0);
      for (std::size_t k = 0; k < list.init_order.size(); ++k) {
        list.probs[list.init_order[k]] = probs[i * m + k];
        list.clicks[list.init_order[k]] = clicks[i * m + k];
      }
    }
  }
}

OracleConfig oracle_config(const TrainConfig& config) { return {config.data.eta1, config.data.eta2}; }

Catalog catalog_for(const TrainConfig& config) {
  return make_catalog(config.data, config.t, derive_seed(config.data_seed, 0));
}

Dataset build_dataset(const TrainConfig& config) {
  config.validate();
  Dataset ds{catalog_for(config), {}};
  ds.pages = generate_pages(ds.catalog, config.data, config.n, config.m, derive_seed(config.data_seed, 1));
  const std::uint64_t rank_seed = derive_seed(config.data_seed, 2);
  const auto rankers = train_initial_rankers(ds.pages, ds.catalog, config.data, config.n, rank_seed);
  apply_initial_ranking(ds.pages, rankers, ds.catalog, config.data, rank_seed);
  simulate_clicks(ds.pages, make_layout(config), ds.catalog, oracle_config(config), derive_seed(config.data_seed, 3));
  return ds;
}

std::vector<PageRecord> select_split(const std::vector<PageRecord>& pages, const std::string& split) {
  std::vector<PageRecord> out;
  for (const auto& p : pages)
    if (p.split == split) out.push_back(p);
  return out;
}

void check_pages(const std::vector<PageRecord>& pages, const TrainConfig& config) {
  const std::size_t vocab = item_vocab(config.data);
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const auto& page = pages[p];
    const std::string where = "page " + std::to_string(p) + ": ";
    if (page.lists.size() != config.n)
      throw ConfigError(where + std::to_string(page.lists.size()) + " lists, config n = " + std::to_string(config.n));
    if (page.history.size() > config.t)
      throw ConfigError(where + "history of " + std::to_string(page.history.size()) + " exceeds t = " + std::to_string(config.t));
    if (page.history_themes.size() != page.history.size()) throw DataError(where + "history_themes misaligned");
    for (auto id : page.history)
      if (id <= 0 || static_cast<std::size_t>(id) >= vocab) throw ConfigError(where + "history id " + std::to_string(id) + " outside the vocabulary");
    for (auto th : page.history_themes)
      if (th >= config.data.num_themes) throw ConfigError(where + "theme outside num_themes");
    for (const auto& list : page.lists) {
      const std::size_t len = list.items.size();
      if (len == 0 || len > config.m)
        throw ConfigError(where + "list of " + std::to_string(len) + " items does not fit m = " + std::to_string(config.m));
      if (list.theme >= config.data.num_themes) throw ConfigError(where + "theme outside num_themes");
      if (list.rel.size() != len || list.init_order.size() != len || list.clicks.size() != len || list.probs.size() != len)
        throw DataError(where + "list fields have different lengths");
      std::vector<bool> seen(len, false);
      for (auto c : list.init_order) {
        if (c >= len || seen[c]) throw DataError(where + "init_order is not a permutation");
        seen[c] = true;
      }
      for (auto id : list.items)
        if (id <= 0 || static_cast<std::size_t>(id) >= vocab) throw ConfigError(where + "item id " + std::to_string(id) + " outside the vocabulary");
    }
  }
}

std::string pages_to_jsonl(const std::vector<PageRecord>& pages) {
  std::string out;
  for (const auto& page : pages) {
    nlohmann::ordered_json j;
    j["user"] = page.user;
    j["split"] = page.split;
    j["history"] = page.history;
    j["history_themes"] = page.history_themes;
    j["lists"] = nlohmann::ordered_json::array();
    for (const auto& list : page.lists) {
      nlohmann::ordered_json l;
      l["theme"] = list.theme;
      l["items"] = list.items;
      l["rel"] = list.rel;
      l["init_order"] = list.init_order;
      l["clicks"] = list.clicks;
      l["probs"] = list.probs;
      j["lists"].push_back(std::move(l));
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PageRecord> pages_from_jsonl(const std::string& text) {
  std::vector<PageRecord> pages;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PageRecord page;
      page.user = j.at("user").get<std::size_t>();
      page.split = j.at("split").get<std::string>();
      page.history = j.at("history").get<std::vector<std::int64_t>>();
      page.history_themes = j.at("history_themes").get<std::vector<std::size_t>>();
      for (const auto& l : j.at("lists")) {
        ListRecord list;
        list.theme = l.at("theme").get<std::size_t>();
        list.items = l.at("items").get<std::vector<std::int64_t>>();
        list.rel = l.at("rel").get<std::vector<int>>();
        list.init_order = l.at("init_order").get<std::vector<std::size_t>>();
        list.clicks = l.at("clicks").get<std::vector<int>>();
        list.probs = l.at("probs").get<std::vector<double>>();
        page.lists.push_back(std::move(list));
      }
      pages.push_back(std::move(page));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("page file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pages;
}

PageBatch make_batch(std::span<const PageRecord* const> pages, const TrainConfig& config) {
  const std::size_t n = config.n, m = config.m, t = config.t;
  PageBatch b;
  b.batch = pages.size();
  b.n = n;
  b.m = m;
  b.t = t;
  const std::size_t slots = b.batch * n * m;
  b.items.assign(slots, 0);
  b.labels.assign(slots, 0.0);
  b.mask.assign(slots, 0.0);
  b.history.assign(b.batch * t, 0);
  b.history_mask.assign(b.batch * t, 0.0);
  if (config.use_categories) {
    b.item_cats.assign(slots, 0);
    b.history_cats.assign(b.batch * t, 0);
  }
  for (std::size_t p = 0; p < b.batch; ++p) {
    const PageRecord& page = *pages[p];
    if (page.lists.size() != n) throw ConfigError("page has " + std::to_string(page.lists.size()) + " lists, config n = " + std::to_string(n));
    if (page.history.size() > t) throw ConfigError("page history exceeds t");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& list = page.lists[i];
      if (list.init_order.size() > m) throw ConfigError("list longer than m");
      for (std::size_t k = 0; k < list.init_order.size(); ++k) {
        const std::size_t c = list.init_order[k];
        const std::size_t slot = (p * n + i) * m + k;
        b.items[slot] = list.items.at(c);
        b.labels[slot] = list.clicks.at(c);
        b.mask[slot] = 1.0;
        if (config.use_categories) b.item_cats[slot] = static_cast<std::int64_t>(list.theme + 1);
      }
    }
    for (std::size_t h = 0; h < page.history.size(); ++h) {
      b.history[p * t + h] = page.history[h];
      b.history_mask[p * t + h] = 1.0;
      if (config.use_categories) b.history_cats[p * t + h] = static_cast<std::int64_t>(page.history_themes.at(h) + 1);
    }
  }
  b.validate();
  return b;
}

PageBatch make_batch(const std::vector<PageRecord>& pages, const TrainConfig& config) {
  std::vector<const PageRecord*> ptrs;
  for (const auto& p : pages) ptrs.push_back(&p);
  return make_batch(std::span<const PageRecord* const>(ptrs), config);
}

}  // namespace par
