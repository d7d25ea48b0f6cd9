#pragma once

// Run configuration: a flat `key = value` text format covering the synthetic
// data, the model shape and the optimiser. Unknown keys are errors.

#include <cstdint>
#include <string>
#include <vector>

#include "par/layout.hpp"
#include "par/model.hpp"

namespace par {

struct DataConfig {
  std::size_t num_themes = 20;
  std::size_t items_per_theme = 36;
  std::size_t latent_dim = 8;
  std::size_t num_users = 400;
  std::size_t user_themes = 6;      // themes each user has interacted with
  std::size_t train_pages = 2000;
  std::size_t test_pages = 500;
  std::size_t pos_per_list = 3;
  double theme_spread = 0.6;        // within-theme noise around the theme centre
  double quality_weight = 0.6;      // hidden per-item quality in the relevance score
  double relevance_noise = 0.1;
  double init_noise = 0.5;          // noise on the user latent seen by initial rankers
  double label_noise = 0.1;         // label flip rate when training initial rankers
  std::size_t ranker_hidden = 32;
  std::size_t ranker_epochs = 4;
  double ranker_lr = 1e-2;
  double eta1 = 0.4;                // decay over position within a list
  double eta2 = 0.5;                // decay over list index
};

struct TrainConfig {
  // page shape
  std::string layout = "stacked";   // stacked | fshape
  std::size_t n = 4;
  std::size_t m = 10;
  std::size_t t = 10;
  // model
  std::size_t d_x = 16;
  std::size_t d_h = 16;
  bool use_categories = true;
  std::size_t heads = 2;
  std::size_t d_a = 16;
  std::size_t d_o = 32;
  std::size_t d_r = 16;
  std::vector<std::size_t> dense_hidden{32};
  double sigma = 0.1;
  std::size_t experts = 4;
  std::vector<std::size_t> expert_hidden{200, 80};
  std::vector<std::size_t> tower_hidden{80};
  Ablation ablation;
  // optimiser
  double lr = 2e-4;
  double l2 = 2e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  // seeds and evaluation
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 7;
  std::uint64_t eval_seed = 2024;
  std::string eval_labels = "relevance";  // relevance | clicks
  std::size_t ablate_seeds = 5;
  DataConfig data;

  /// Throws ConfigError on zero sizes, bad presets or negative rates.
  void validate() const;
};

/// Parses `key = value` lines ('#' starts a comment). Keys not given keep their
/// defaults. The result is validated.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);

/// Applies one `key = value` assignment; throws ConfigError on unknown keys or
/// unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Canonical text: every key in a fixed order, doubles printed round-trip exact.
std::string config_to_text(const TrainConfig& config);

/// Vocabulary sizes follow from the catalog dimensions (id 0 is padding).
std::size_t item_vocab(const DataConfig& data);
std::size_t category_vocab(const DataConfig& data);

ModelConfig model_config(const TrainConfig& config);
PageLayout make_layout(const TrainConfig& config);

}  // namespace par
