#pragma once

// Page-level utility metrics (clicks and summed click probabilities) and
// per-list ranking metrics (nDCG, MAP) over binary relevance.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace par {

/// Mean over pages of the number of clicks.
double utility(const std::vector<std::vector<int>>& clicks);

/// Mean over pages of summed probabilities. Each page holds n*m slot
/// probabilities; `list` restricts the sum to slots list*m .. list*m+m-1.
double sctr(const std::vector<std::vector<double>>& probs, std::size_t m, std::optional<std::size_t> list = {});

/// Binary-gain nDCG with log2(k+1) discount; 0 when nothing is relevant.
double ndcg(std::span<const int> ranked_rel);

/// Mean precision at the relevant ranks; 0 when nothing is relevant.
double average_precision(std::span<const int> ranked_rel);

/// Everything observed for one displayed page.
struct PageOutcome {
  std::vector<double> probs;               // n*m slots
  std::vector<int> clicks;                 // n*m slots
  std::vector<std::vector<int>> ranked;    // per list, labels in display order
};

struct MetricReport {
  std::string model;
  double utility = 0.0;
  double sctr = 0.0;
  std::vector<std::string> roles;
  std::vector<double> sctr_lists;  // aligned with roles
  double ndcg = 0.0;
  double map = 0.0;
  std::uint64_t seed = 0;
  std::int64_t timestamp = 0;
};

MetricReport compute_report(const std::string& model, const std::vector<PageOutcome>& pages,
                            const std::vector<std::string>& roles, std::size_t m);

/// model,utility,sctr,sctr_<role>...,ndcg,map,seed,timestamp
std::string csv_header(const std::vector<std::string>& roles);
std::string csv_row(const MetricReport& report);
std::string reports_to_csv(const std::vector<MetricReport>& reports);
std::string reports_to_json(const std::vector<MetricReport>& reports);

struct MetricSummary {
  std::string model;
  std::size_t seeds = 0;
  std::vector<std::string> columns;  // utility, sctr, sctr_<role>..., ndcg, map
  std::vector<double> mean;
  std::vector<double> stddev;        // sample standard deviation (0 for one seed)
};

/// Groups reports by model name (first-seen order) and aggregates every metric.
std::vector<MetricSummary> summarize(const std::vector<MetricReport>& reports);
std::string summaries_to_csv(const std::vector<MetricSummary>& summaries);

/// SOURCE_DATE_EPOCH when set, else 0, so reruns produce identical tables.
std::int64_t report_timestamp();

}  // namespace par
