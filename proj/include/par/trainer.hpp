#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "par/checkpoint.hpp"
#include "par/config.hpp"
#include "par/data.hpp"
#include "par/gradcheck.hpp"
#include "par/metrics.hpp"
#include "par/model.hpp"

namespace par {

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Deterministic given config.seed: fixed init, fixed per-epoch shuffle.
/// Pages whose split is not "train" are ignored. Throws ConfigError before any
/// step when pages do not fit the config. `log` receives one line per epoch.
TrainResult train(const TrainConfig& config, const std::vector<PageRecord>& pages, std::ostream* log = nullptr);

/// Rebuilds the model described by the checkpoint's config and loads its values.
ParModel model_from_checkpoint(const Checkpoint& checkpoint);
TrainConfig config_from_checkpoint(const Checkpoint& checkpoint);

/// Mean masked BCE over all pages (no graph recorded).
double mean_loss(const ParModel& model, const TrainConfig& config, const std::vector<PageRecord>& pages);

/// Per page and list, the candidate indices in reranked display order.
std::vector<std::vector<std::vector<std::size_t>>> rerank_pages(const ParModel& model, const TrainConfig& config,
                                                                const std::vector<PageRecord>& pages);

struct EvalResult {
  MetricReport model;
  MetricReport init;
};

/// Reranks every page, re-queries the oracle on the new display and samples
/// clicks with config.eval_seed. The initial order is scored the same way.
EvalResult evaluate(const ParModel& model, const TrainConfig& config, const std::vector<PageRecord>& pages,
                    const Catalog& catalog);

/// Metrics of pages shown in the given candidate orders.
MetricReport evaluate_orders(const std::string& name, const TrainConfig& config, const std::vector<PageRecord>& pages,
                             const std::vector<std::vector<std::vector<std::size_t>>>& orders, const Catalog& catalog);

/// Finite-difference check of the full model loss on a random two-page batch.
/// Requires a tiny config (n <= 2, m <= 3, t <= 2, dims <= 4, experts <= 2).
GradCheckReport gradcheck(const TrainConfig& config);

/// Config used by `gradcheck` when none is given.
TrainConfig tiny_config();

/// Trains PAR plus each named variant for config.ablate_seeds seeds
/// (config.seed, config.seed + 1, ...) on the same pages and reports each run.
/// A failing variant aborts with a ConfigError naming it.
std::vector<MetricReport> ablate(const TrainConfig& config, const std::vector<PageRecord>& pages,
                                 const Catalog& catalog, const std::vector<std::string>& variants,
                                 std::ostream* log = nullptr);

}  // namespace par
