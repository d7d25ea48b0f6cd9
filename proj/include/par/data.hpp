#pragma once

// Synthetic multi-list pages: a themed item catalog with users, pointwise
// initial rankers, and the oracle click model
//   p = rel * pos^-eta1 * list^-eta2 * dissim
// used both to label training pages and to score reranked ones.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "par/config.hpp"
#include "par/embedding.hpp"
#include "par/layout.hpp"
#include "par/nn.hpp"
#include "par/scoring.hpp"

namespace par {

/// splitmix64 of (base, stream): independent per-page / per-user generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Item ids are 1 + theme * items_per_theme + k; id 0 is padding.
struct Catalog {
  std::size_t num_themes = 0;
  std::size_t items_per_theme = 0;
  std::size_t dim = 0;
  std::vector<double> embedding;  // vocab x dim, unit rows (row 0 zero)
  std::vector<double> quality;    // vocab, hidden from the initial rankers
  std::vector<std::vector<double>> user_latent;
  std::vector<std::vector<std::size_t>> user_themes;
  std::vector<std::vector<std::int64_t>> user_history;

  std::size_t vocab() const { return num_themes * items_per_theme + 1; }
  std::int64_t item_id(std::size_t theme, std::size_t k) const {
    return static_cast<std::int64_t>(1 + theme * items_per_theme + k);
  }
  /// Throws DataError for padding or out-of-range ids.
  std::size_t theme_of(std::int64_t id) const;
  std::span<const double> embedding_of(std::int64_t id) const;
};

/// `history_len` bounds the per-user history (lengths vary in [ceil(t/2), t]).
Catalog make_catalog(const DataConfig& config, std::size_t history_len, std::uint64_t seed);

/// Ground-truth affinity of a user for an item, without sampling noise.
double affinity(const Catalog& catalog, std::size_t user, std::int64_t item, const DataConfig& config);

struct ListRecord {
  std::size_t theme = 0;
  std::vector<std::int64_t> items;      // candidate order
  std::vector<int> rel;                 // aligned with items
  std::vector<std::size_t> init_order;  // init_order[k] = candidate shown at position k
  std::vector<int> clicks;              // aligned with items, observed under init_order
  std::vector<double> probs;            // aligned with items

  friend bool operator==(const ListRecord&, const ListRecord&) = default;
};

struct PageRecord {
  std::size_t user = 0;
  std::string split;  // "train" | "test"
  std::vector<std::int64_t> history;
  std::vector<std::size_t> history_themes;
  std::vector<ListRecord> lists;

  friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

/// Pages of n lists with m candidates each, pos_per_list of them relevant.
/// The first train_pages records are "train", the rest "test". init_order is
/// the identity until an initial ranker is applied.
std::vector<PageRecord> generate_pages(const Catalog& catalog, const DataConfig& config, std::size_t n,
                                       std::size_t m, std::uint64_t seed);

/// Pointwise relevance scorer on [item, noisy user, item * noisy user].
struct InitialRanker {
  ParameterStore params;
  Mlp net;

  std::vector<double> score(const Catalog& catalog, std::span<const double> user,
                            std::span<const std::int64_t> items) const;
};

/// The user latent as seen by the initial rankers for one page.
std::vector<double> noisy_user(const Catalog& catalog, std::size_t user, double noise, std::uint64_t seed);

/// One ranker per list index, trained on the train split with flipped labels.
std::vector<InitialRanker> train_initial_rankers(const std::vector<PageRecord>& pages, const Catalog& catalog,
                                                 const DataConfig& config, std::size_t n, std::uint64_t seed);

/// Fills init_order of every list by ranker score (descending, stable).
void apply_initial_ranking(std::vector<PageRecord>& pages, const std::vector<InitialRanker>& rankers,
                           const Catalog& catalog, const DataConfig& config, std::uint64_t seed);

struct OracleConfig {
  double eta1 = 0.4;
  double eta2 = 0.5;
};

/// pos^-eta1 * list^-eta2 with 1-based pos (within list) and list.
double decay_factor(std::size_t pos, std::size_t list, const OracleConfig& config);

/// 1 - cos(item, mean of Manhattan-1 neighbours), clamped to [0, 1]; 1 without neighbours.
/// `shown[i][k]` is the item at display position k of list i (0 for empty).
double dissimilarity(const PageLayout& layout, const Catalog& catalog,
                     const std::vector<std::vector<std::int64_t>>& shown, std::size_t list, std::size_t pos);

/// Click probabilities of the displayed page, n*m in slot order (0 for empty slots).
std::vector<double> oracle_click_prob(const PageLayout& layout, const Catalog& catalog,
                                      const std::vector<std::vector<std::int64_t>>& shown,
                                      const std::vector<std::vector<int>>& shown_rel, const OracleConfig& config);

/// Independent Bernoulli draws.
std::vector<int> sample_clicks(std::span<const double> probs, Rng& rng);

/// Items and relevance of a page displayed in `order` (order[i][k] = candidate at position k).
void display(const PageRecord& page, const std::vector<std::vector<std::size_t>>& order,
             std::vector<std::vector<std::int64_t>>& shown, std::vector<std::vector<int>>& shown_rel);

/// Labels every page with oracle probabilities and sampled clicks under init_order.
void simulate_clicks(std::vector<PageRecord>& pages, const PageLayout& layout, const Catalog& catalog,
                     const OracleConfig& oracle, std::uint64_t seed);

struct Dataset {
  Catalog catalog;
  std::vector<PageRecord> pages;
};

/// Catalog, pages, initial ranking and clicks, all from config.data_seed.
Dataset build_dataset(const TrainConfig& config);

/// The catalog alone (what evaluation needs for dissimilarity).
Catalog catalog_for(const TrainConfig& config);

OracleConfig oracle_config(const TrainConfig& config);

std::vector<PageRecord> select_split(const std::vector<PageRecord>& pages, const std::string& split);

/// Throws ConfigError when a page does not fit the configured n, m, t or vocabulary.
void check_pages(const std::vector<PageRecord>& pages, const TrainConfig& config);

/// Line-delimited JSON, one page per line.
std::string pages_to_jsonl(const std::vector<PageRecord>& pages);
/// Throws DataError naming the line on malformed records.
std::vector<PageRecord> pages_from_jsonl(const std::string& text);

/// Model input for pages shown in their initial order; labels are the clicks.
PageBatch make_batch(std::span<const PageRecord* const> pages, const TrainConfig& config);
PageBatch make_batch(const std::vector<PageRecord>& pages, const TrainConfig& config);

}  // namespace par
