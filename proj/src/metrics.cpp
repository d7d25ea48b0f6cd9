#include "par/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <json.hpp>

#include "par/errors.hpp"

namespace par {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> metric_values(const MetricReport& r) {
  std::vector<double> v{r.utility, r.sctr};
  v.insert(v.end(), r.sctr_lists.begin(), r.sctr_lists.end());
  v.push_back(r.ndcg);
  v.push_back(r.map);
  return v;
}

std::vector<std::string> metric_columns(const std::vector<std::string>& roles) {
  std::vector<std::string> c{"utility", "sctr"};
  for (const auto& r : roles) c.push_back("sctr_" + r);
  c.push_back("ndcg");
  c.push_back("map");
  return c;
}

}  // namespace

double utility(const std::vector<std::vector<int>>& clicks) {
  if (clicks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& page : clicks)
    for (int c : page) total += c;
  return total / static_cast<double>(clicks.size());
}

double sctr(const std::vector<std::vector<double>>& probs, std::size_t m, std::optional<std::size_t> list) {
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& page : probs) {
    std::size_t begin = 0, end = page.size();
    if (list) {
      begin = *list * m;
      end = begin + m;
      if (end > page.size()) throw DimensionError("sctr: list " + std::to_string(*list) + " is outside the page");
    }
    for (std::size_t k = begin; k < end; ++k) total += page[k];
  }
  return total / static_cast<double>(probs.size());
}

double ndcg(std::span<const int> ranked_rel) {
  double dcg = 0.0, ideal = 0.0;
  std::size_t relevant = 0;
  for (std::size_t k = 0; k < ranked_rel.size(); ++k) {
    if (ranked_rel[k] == 0) continue;
    dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    ++relevant;
  }
  if (relevant == 0) return 0.0;
  for (std::size_t k = 0; k < relevant; ++k) ideal += 1.0 / std::log2(static_cast<double>(k) + 2.0);
  return dcg / ideal;
}

double average_precision(std::span<const int> ranked_rel) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked_rel.size(); ++k) {
    if (ranked_rel[k] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

MetricReport compute_report(const std::string& model, const std::vector<PageOutcome>& pages,
                            const std::vector<std::string>& roles, std::size_t m) {
  MetricReport r;
  r.model = model;
  r.roles = roles;
  std::vector<std::vector<double>> probs;
  std::vector<std::vector<int>> clicks;
  double ndcg_sum = 0.0, ap_sum = 0.0;
  std::size_t lists = 0;
  for (const auto& page : pages) {
    if (page.probs.size() != roles.size() * m) throw DimensionError("page outcome does not have n*m slots");
    probs.push_back(page.probs);
    clicks.push_back(page.clicks);
    for (const auto& ranked : page.ranked) {
      ndcg_sum += ndcg(ranked);
      ap_sum += average_precision(ranked);
      ++lists;
    }
  }
  r.utility = utility(clicks);
  r.sctr = sctr(probs, m);
  for (std::size_t i = 0; i < roles.size(); ++i) r.sctr_lists.push_back(sctr(probs, m, i));
  r.ndcg = lists ? ndcg_sum / static_cast<double>(lists) : 0.0;
  r.map = lists ? ap_sum / static_cast<double>(lists) : 0.0;
  r.timestamp = report_timestamp();
  return r;
}

std::string csv_header(const std::vector<std::string>& roles) {
  std::string out = "model";
  for (const auto& c : metric_columns(roles)) out += "," + c;
  return out + ",seed,timestamp";
}

std::string csv_row(const MetricReport& report) {
  std::string out = report.model;
  for (double v : metric_values(report)) out += "," + num(v);
  return out + "," + std::to_string(report.seed) + "," + std::to_string(report.timestamp);
}

std::string reports_to_csv(const std::vector<MetricReport>& reports) {
  if (reports.empty()) return csv_header({}) + "\n";
  std::string out = csv_header(reports.front().roles) + "\n";
  for (const auto& r : reports) out += csv_row(r) + "\n";
  return out;
}

std::string reports_to_json(const std::vector<MetricReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    const auto cols = metric_columns(r.roles);
    const auto vals = metric_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) j[cols[k]] = vals[k];
    j["seed"] = r.seed;
    j["timestamp"] = r.timestamp;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<MetricSummary> summarize(const std::vector<MetricReport>& reports) {
  std::vector<MetricSummary> out;
  std::vector<std::vector<std::vector<double>>> values;
  for (const auto& r : reports) {
    std::size_t g = 0;
    while (g < out.size() && out[g].model != r.model) ++g;
    if (g == out.size()) {
      out.push_back({r.model, 0, metric_columns(r.roles), {}, {}});
      values.emplace_back();
    }
    values[g].push_back(metric_values(r));
    ++out[g].seeds;
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    const std::size_t cols = out[g].columns.size(), count = values[g].size();
    out[g].mean.assign(cols, 0.0);
    out[g].stddev.assign(cols, 0.0);
    for (const auto& row : values[g])
      for (std::size_t c = 0; c < cols; ++c) out[g].mean[c] += row[c] / static_cast<double>(count);
    if (count > 1) {
      for (const auto& row : values[g])
        for (std::size_t c = 0; c < cols; ++c) out[g].stddev[c] += std::pow(row[c] - out[g].mean[c], 2);
      for (auto& s : out[g].stddev) s = std::sqrt(s / static_cast<double>(count - 1));
    }
  }
  return out;
}

std::string summaries_to_csv(const std::vector<MetricSummary>& summaries) {
  if (summaries.empty()) return "model,seeds\n";
  std::string out = "model,seeds";
  for (const auto& c : summaries.front().columns) out += "," + c + "_mean," + c + "_std";
  out += "\n";
  for (const auto& s : summaries) {
    out += s.model + "," + std::to_string(s.seeds);
    for (std::size_t c = 0; c < s.columns.size(); ++c) out += "," + num(s.mean[c]) + "," + num(s.stddev[c]);
    out += "\n";
  }
  return out;
}

std::int64_t report_timestamp() {
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return 0;
}

}  // namespace par
