// par: command-line driver for data generation, training, reranking,
// evaluation, gradient checking and ablation runs.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <malloc.h>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "par/checkpoint.hpp"
#include "par/config.hpp"
#include "par/data.hpp"
#include "par/errors.hpp"
#include "par/io.hpp"
#include "par/kernels.hpp"
#include "par/metrics.hpp"
#include "par/trainer.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string variants;
};

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const par::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const par::DataError*>(&e)) return "data";
  if (dynamic_cast<const par::DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const par::ContractError*>(&e)) return "contract";
  if (dynamic_cast<const par::NumericError*>(&e)) return "numeric";
  return "internal";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw par::ConfigError(std::string(command) + " needs " + flag);
}

par::TrainConfig load(const Options& o) { return o.config.empty() ? par::TrainConfig{} : par::load_config(o.config); }

std::vector<par::PageRecord> pages_for(const Options& o, const par::TrainConfig& config) {
  if (o.data.empty()) return par::build_dataset(config).pages;
  auto pages = par::pages_from_jsonl(par::read_file(o.data));
  par::check_pages(pages, config);
  return pages;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix;
  return path.substr(0, dot) + suffix;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_gen_data(const Options& o) {
  auto config = load(o);
  if (o.seed) config.data_seed = *o.seed;
  config.validate();
  require(o.out, "--out", "gen-data");
  const auto ds = par::build_dataset(config);
  par::write_file_atomic(o.out, par::pages_to_jsonl(ds.pages));
  std::size_t train = 0, clicks = 0;
  for (const auto& p : ds.pages) {
    train += p.split == "train";
    for (const auto& l : p.lists)
      for (int c : l.clicks) clicks += c;
  }
  std::cout << "pages " << ds.pages.size() << " train " << train << " test " << ds.pages.size() - train << " clicks "
            << clicks << " -> " << o.out << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  auto config = load(o);
  if (o.seed) config.seed = *o.seed;
  config.validate();
  require(o.out, "--out", "train");
  const auto pages = pages_for(o, config);
  const auto result = par::train(config, pages, &std::cerr);
  result.checkpoint.save(o.out);
  std::string curve = "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    char line[64];
    std::snprintf(line, sizeof line, "%zu,%.10g\n", e + 1, result.epoch_loss[e]);
    curve += line;
  }
  par::write_file_atomic(with_suffix(o.out, ".loss.csv"), curve);
  std::cout << "checkpoint -> " << o.out << "\n";
  return 0;
}

struct Loaded {
  par::Checkpoint checkpoint;
  par::TrainConfig config;
};

Loaded load_checkpoint(const Options& o, const char* command) {
  require(o.checkpoint, "--checkpoint", command);
  Loaded l{par::Checkpoint::load(o.checkpoint), {}};
  l.config = par::config_from_checkpoint(l.checkpoint);
  return l;
}

int cmd_rerank(const Options& o) {
  auto [ck, config] = load_checkpoint(o, "rerank");
  require(o.out, "--out", "rerank");
  const auto model = par::model_from_checkpoint(ck);
  const auto test = par::select_split(pages_for(o, config), "test");
  const auto orders = par::rerank_pages(model, config, test);
  std::string out;
  for (std::size_t p = 0; p < test.size(); ++p) {
    nlohmann::ordered_json j;
    j["page"] = p;
    j["user"] = test[p].user;
    j["orders"] = orders[p];
    out += j.dump() + "\n";
  }
  par::write_file_atomic(o.out, out);
  std::cout << "reranked " << test.size() << " pages -> " << o.out << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  auto [ck, config] = load_checkpoint(o, "eval");
  require(o.out, "--out", "eval");
  if (o.seed) config.eval_seed = *o.seed;
  const auto model = par::model_from_checkpoint(ck);
  const auto test = par::select_split(pages_for(o, config), "test");
  const auto result = par::evaluate(model, config, test, par::catalog_for(config));
  const std::vector<par::MetricReport> rows{result.init, result.model};
  par::write_file_atomic(o.out, par::reports_to_csv(rows));
  par::write_file_atomic(with_suffix(o.out, ".json"), par::reports_to_json(rows));
  std::cout << par::reports_to_csv(rows);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  auto config = o.config.empty() ? par::tiny_config() : par::load_config(o.config);
  if (o.seed) config.seed = *o.seed;
  const auto report = par::gradcheck(config);
  std::string table = "parameter,count,max_rel_error,analytic,numeric\n";
  for (const auto& e : report.entries) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%zu,%.3e,%.10g,%.10g\n", e.name.c_str(), e.count, e.max_rel_error, e.analytic,
                  e.numeric);
    table += line;
  }
  std::cout << table;
  std::printf("max_rel_error %.3e tolerance %.1e %s\n", report.max_rel_error, report.tolerance,
              report.passed ? "PASS" : "FAIL");
  if (!o.out.empty()) par::write_file_atomic(o.out, table);
  return report.passed ? 0 : 2;
}

int cmd_ablate(const Options& o) {
  auto config = load(o);
  if (o.seed) config.seed = *o.seed;
  config.validate();
  require(o.out, "--out", "ablate");
  const auto variants = o.variants.empty() ? par::ablation_names() : split_list(o.variants);
  for (const auto& v : variants) par::Ablation::variant(v);
  const auto pages = pages_for(o, config);
  const auto rows = par::ablate(config, pages, par::catalog_for(config), variants, &std::cerr);
  par::write_file_atomic(o.out, par::reports_to_csv(rows));
  par::write_file_atomic(with_suffix(o.out, ".summary.csv"), par::summaries_to_csv(par::summarize(rows)));
  std::cout << par::summaries_to_csv(par::summarize(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large autograd buffers on the heap instead of fresh mmaps per step.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  par::kernels::set_num_threads(par::kernels::threads_from_env());

  CLI::App app{"Page-level attentional reranking: data, training and evaluation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--seed", o.seed, "seed override");
    sub->add_option("--out", o.out, "output path");
  };
  auto* gen = app.add_subcommand("gen-data", "generate synthetic pages (JSONL)");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train);
  train->add_option("--data", o.data, "page file (default: generate from config)");
  auto* rerank = app.add_subcommand("rerank", "write reranked orders of the test pages");
  add_common(rerank);
  rerank->add_option("--data", o.data, "page file");
  rerank->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  auto* eval = app.add_subcommand("eval", "metrics of the model and the initial order on test pages");
  add_common(eval);
  eval->add_option("--data", o.data, "page file");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  add_common(grad);
  auto* ablate = app.add_subcommand("ablate", "train PAR and its variants over several seeds");
  add_common(ablate);
  ablate->add_option("--data", o.data, "page file");
  ablate->add_option("--variants", o.variants, "comma list of dsa,hdsa,scale,ssa,dn,mmoe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (train->parsed()) return cmd_train(o);
    if (rerank->parsed()) return cmd_rerank(o);
    if (eval->parsed()) return cmd_eval(o);
    if (grad->parsed()) return cmd_gradcheck(o);
    if (ablate->parsed()) return cmd_ablate(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_kind(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}
