#include "par/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "par/errors.hpp"
#include "par/ops.hpp"
#include "par/optim.hpp"

namespace par {

namespace {

std::vector<const PageRecord*> train_split(const std::vector<PageRecord>& pages) {
  std::vector<const PageRecord*> out;
  for (const auto& p : pages)
    if (p.split == "train") out.push_back(&p);
  return out;
}

/// Forward scores of every page, n*m per page in display-slot order.
std::vector<std::vector<double>> score_pages(const ParModel& model, const TrainConfig& config,
                                             const std::vector<PageRecord>& pages) {
  NoGradGuard guard;
  const std::size_t slots = config.n * config.m;
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < pages.size(); start += config.batch_size) {
    const std::size_t count = std::min(config.batch_size, pages.size() - start);
    std::vector<const PageRecord*> chunk;
    for (std::size_t k = 0; k < count; ++k) chunk.push_back(&pages[start + k]);
    const Tensor scores = model.scores(make_batch(std::span<const PageRecord* const>(chunk), config));
    const auto v = scores.values();
    for (std::size_t k = 0; k < count; ++k) out.emplace_back(v.begin() + k * slots, v.begin() + (k + 1) * slots);
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<PageRecord>& pages, std::ostream* log) {
  config.validate();
  check_pages(pages, config);
  const auto train_pages = train_split(pages);

  ParModel model(model_config(config), make_layout(config), config.seed);
  auto params = model.parameters().tensors();
  AdamState state(AdamConfig{.lr = config.lr, .l2 = config.l2}, params);

  TrainResult result;
  std::vector<std::size_t> order(train_pages.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0x5EED0000 + epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<const PageRecord*> chunk;
      for (std::size_t k = 0; k < count; ++k) chunk.push_back(train_pages[order[start + k]]);
      const PageBatch batch = make_batch(std::span<const PageRecord* const>(chunk), config);
      for (auto& p : params) p.zero_grad();
      Tensor loss = model.loss(batch);
      loss.backward();
      adam_step(params, state);
      total += loss.item();
      ++batches;
    }
    const double mean = batches ? total / static_cast<double>(batches) : 0.0;
    result.epoch_loss.push_back(mean);
    if (log) {
      char line[128];
      std::snprintf(line, sizeof line, "epoch %zu/%zu loss %.6f", epoch + 1, config.epochs, mean);
      *log << line << "\n";
    }
  }
  result.checkpoint = snapshot(model, config_to_text(config), config.epochs, result.epoch_loss);
  return result;
}

TrainConfig config_from_checkpoint(const Checkpoint& checkpoint) { return parse_config(checkpoint.config_text); }

ParModel model_from_checkpoint(const Checkpoint& checkpoint) {
  const TrainConfig config = config_from_checkpoint(checkpoint);
  ParModel model(model_config(config), make_layout(config), config.seed);
  restore(model, checkpoint);
  return model;
}

double mean_loss(const ParModel& model, const TrainConfig& config, const std::vector<PageRecord>& pages) {
  if (pages.empty()) return 0.0;
  NoGradGuard guard;
  const PageBatch batch = make_batch(pages, config);
  return model.loss(batch).item();
}

std::vector<std::vector<std::vector<std::size_t>>> rerank_pages(const ParModel& model, const TrainConfig& config,
                                                                const std::vector<PageRecord>& pages) {
  check_pages(pages, config);
  const auto scores = score_pages(model, config, pages);
  std::vector<std::vector<std::vector<std::size_t>>> orders;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    std::vector<double> mask(config.n * config.m, 0.0);
    for (std::size_t i = 0; i < config.n; ++i)
      for (std::size_t k = 0; k < pages[p].lists[i].items.size(); ++k) mask[i * config.m + k] = 1.0;
    const auto slot_order = rerank(scores[p], mask, config.n, config.m);
    std::vector<std::vector<std::size_t>> page_order(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
      const auto& init = pages[p].lists[i].init_order;
      for (auto slot : slot_order[i])
        if (slot < init.size()) page_order[i].push_back(init[slot]);
    }
    orders.push_back(std::move(page_order));
  }
  return orders;
}

MetricReport evaluate_orders(const std::string& name, const TrainConfig& config, const std::vector<PageRecord>& pages,
                             const std::vector<std::vector<std::vector<std::size_t>>>& orders, const Catalog& catalog) {
  if (orders.size() != pages.size()) throw ContractError("one order per page is required");
  const PageLayout layout = make_layout(config);
  const OracleConfig oracle = oracle_config(config);
  const bool by_clicks = config.eval_labels == "clicks";
  std::vector<PageOutcome> outcomes;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    std::vector<std::vector<std::int64_t>> shown;
    std::vector<std::vector<int>> shown_rel;
    display(pages[p], orders[p], shown, shown_rel);
    PageOutcome out;
    out.probs = oracle_click_prob(layout, catalog, shown, shown_rel, oracle);
    Rng rng(derive_seed(config.eval_seed, p));
    out.clicks = sample_clicks(out.probs, rng);
    for (std::size_t i = 0; i < pages[p].lists.size(); ++i) {
      if (!by_clicks) {
        out.ranked.push_back(shown_rel[i]);
        continue;
      }
      std::vector<int> labels;
      for (auto c : orders[p][i]) labels.push_back(pages[p].lists[i].clicks.at(c));
      out.ranked.push_back(std::move(labels));
    }
    outcomes.push_back(std::move(out));
  }
  MetricReport report = compute_report(name, outcomes, layout.roles(), config.m);
  report.seed = config.seed;
  return report;
}

EvalResult evaluate(const ParModel& model, const TrainConfig& config, const std::vector<PageRecord>& pages,
                    const Catalog& catalog) {
  std::vector<std::vector<std::vector<std::size_t>>> init;
  for (const auto& page : pages) {
    std::vector<std::vector<std::size_t>> order;
    for (const auto& list : page.lists) order.push_back(list.init_order);
    init.push_back(std::move(order));
  }
  EvalResult result;
  result.model = evaluate_orders(model.config().ablation.tag(), config, pages, rerank_pages(model, config, pages), catalog);
  result.init = evaluate_orders("INIT", config, pages, init, catalog);
  return result;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.n = 2;
  c.m = 3;
  c.t = 2;
  c.d_x = 4;
  c.d_h = 4;
  c.heads = 2;
  c.d_a = 3;
  c.d_o = 4;
  c.d_r = 3;
  c.dense_hidden = {4};
  c.experts = 2;
  c.expert_hidden = {4, 3};
  c.tower_hidden = {3};
  c.data.num_themes = 2;
  c.data.items_per_theme = 3;
  c.data.user_themes = 2;
  c.data.pos_per_list = 1;
  c.validate();
  return c;
}

GradCheckReport gradcheck(const TrainConfig& config) {
  config.validate();
  const std::size_t dims[] = {config.d_x, config.d_h, config.d_a, config.d_o, config.d_r};
  bool tiny = config.n <= 2 && config.m <= 3 && config.t <= 2 && config.experts <= 2;
  for (auto d : dims) tiny = tiny && d <= 4;
  if (!tiny) throw ConfigError("gradcheck needs a tiny config (n<=2, m<=3, t<=2, dims<=4, experts<=2)");

  ParModel model(model_config(config), make_layout(config), config.seed);
  // Embeddings in [-1, 1] and non-zero biases keep every gradient well above
  // the finite-difference roundoff floor; weight matrices keep their init.
  Rng rng(derive_seed(config.seed, 0x6C));
  for (const auto& e : model.parameters().entries()) {
    Tensor t = e.tensor;
    auto v = t.data();
    if (e.name.rfind("embedding.", 0) == 0) {
      for (std::size_t k = t.dim(1); k < v.size(); ++k) v[k] = uniform(rng, -2.0, 2.0);
    } else if (e.name.ends_with("bias") || e.name == "ss.steepness") {
      for (auto& x : v) x = uniform(rng, -0.5, 0.5);
    }
  }

  const std::size_t pages = 2, n = config.n, m = config.m, t = config.t;
  PageBatch batch;
  batch.batch = pages;
  batch.n = n;
  batch.m = m;
  batch.t = t;
  const std::size_t vocab = item_vocab(config.data);
  for (std::size_t s = 0; s < pages * n * m; ++s) {
    const bool pad = s == pages * n * m - 1 && m > 1;  // one padded slot
    batch.items.push_back(pad ? 0 : static_cast<std::int64_t>(1 + s % (vocab - 1)));
    if (config.use_categories) batch.item_cats.push_back(pad ? 0 : static_cast<std::int64_t>(1 + (s / m) % config.data.num_themes));
    batch.labels.push_back(pad ? 0.0 : static_cast<double>(s % 2));
    batch.mask.push_back(pad ? 0.0 : 1.0);
  }
  for (std::size_t h = 0; h < pages * t; ++h) {
    const bool pad = h == pages * t - 1 && t > 1;
    batch.history.push_back(pad ? 0 : static_cast<std::int64_t>(1 + (3 * h + 1) % (vocab - 1)));
    if (config.use_categories) batch.history_cats.push_back(pad ? 0 : static_cast<std::int64_t>(1 + h % config.data.num_themes));
    batch.history_mask.push_back(pad ? 0.0 : 1.0);
  }
  batch.validate();

  return finite_diff_check([&] { return model.loss(batch); }, model.parameters().tensors(), model.parameters().names());
}

std::vector<MetricReport> ablate(const TrainConfig& config, const std::vector<PageRecord>& pages,
                                 const Catalog& catalog, const std::vector<std::string>& variants,
                                 std::ostream* log) {
  config.validate();
  for (const auto& v : variants) Ablation::variant(v);
  const auto test = select_split(pages, "test");
  std::vector<MetricReport> rows;
  for (std::size_t s = 0; s < config.ablate_seeds; ++s) {
    std::vector<std::string> runs{"none"};
    runs.insert(runs.end(), variants.begin(), variants.end());
    for (const auto& name : runs) {
      TrainConfig run = config;
      run.seed = config.seed + s;
      run.ablation = Ablation::parse(name);
      try {
        const TrainResult trained = train(run, pages);
        const ParModel model = model_from_checkpoint(trained.checkpoint);
        rows.push_back(evaluate(model, run, test, catalog).model);
      } catch (const std::exception& e) {
        throw ConfigError("variant " + run.ablation.tag() + " (seed " + std::to_string(run.seed) + ") failed: " + e.what());
      }
      if (log) *log << rows.back().model << " seed " << run.seed << " sctr " << rows.back().sctr << "\n";
    }
  }
  return rows;
}

}  // namespace par
