#include "par/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "par/errors.hpp"

namespace par {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t out = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + text + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_uint(key, item));
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

std::string ablation_text(const Ablation& a) {
  std::string out;
  const bool flags[] = {a.dsa, a.hdsa, a.scale, a.ssa, a.dn, a.mmoe};
  for (std::size_t k = 0; k < 6; ++k) {
    if (!flags[k]) continue;
    if (!out.empty()) out += ",";
    out += ablation_names()[k];
  }
  return out.empty() ? "none" : out;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

#define PAR_SIZE(name, member)                                                                       \
  Field {                                                                                            \
    name, [](const TrainConfig& c) { return std::to_string(c.member); },                            \
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_uint(k, v); } \
  }
#define PAR_REAL(name, member)                                                                         \
  Field {                                                                                              \
    name, [](const TrainConfig& c) { return format_double(c.member); },                                \
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); } \
  }
#define PAR_LIST(name, member)                                                                         \
  Field {                                                                                              \
    name, [](const TrainConfig& c) { return join_sizes(c.member); },                                   \
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_sizes(k, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"layout", [](const TrainConfig& c) { return c.layout; },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.layout = v; }},
      PAR_SIZE("n", n),
      PAR_SIZE("m", m),
      PAR_SIZE("t", t),
      PAR_SIZE("d_x", d_x),
      PAR_SIZE("d_h", d_h),
      Field{"use_categories", [](const TrainConfig& c) { return std::string(c.use_categories ? "true" : "false"); },
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.use_categories = parse_bool(k, v); }},
      PAR_SIZE("heads", heads),
      PAR_SIZE("d_a", d_a),
      PAR_SIZE("d_o", d_o),
      PAR_SIZE("d_r", d_r),
      PAR_LIST("dense_hidden", dense_hidden),
      PAR_REAL("sigma", sigma),
      PAR_SIZE("experts", experts),
      PAR_LIST("expert_hidden", expert_hidden),
      PAR_LIST("tower_hidden", tower_hidden),
      Field{"ablation", [](const TrainConfig& c) { return ablation_text(c.ablation); },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.ablation = Ablation::parse(v); }},
      PAR_REAL("lr", lr),
      PAR_REAL("l2", l2),
      PAR_SIZE("batch_size", batch_size),
      PAR_SIZE("epochs", epochs),
      PAR_SIZE("seed", seed),
      PAR_SIZE("data_seed", data_seed),
      PAR_SIZE("eval_seed", eval_seed),
      Field{"eval_labels", [](const TrainConfig& c) { return c.eval_labels; },
            [](TrainConfig& c, const std::string&, const std::string& v) { c.eval_labels = v; }},
      PAR_SIZE("ablate_seeds", ablate_seeds),
      PAR_SIZE("num_themes", data.num_themes),
      PAR_SIZE("items_per_theme", data.items_per_theme),
      PAR_SIZE("latent_dim", data.latent_dim),
      PAR_SIZE("num_users", data.num_users),
      PAR_SIZE("user_themes", data.user_themes),
      PAR_SIZE("train_pages", data.train_pages),
      PAR_SIZE("test_pages", data.test_pages),
      PAR_SIZE("pos_per_list", data.pos_per_list),
      PAR_REAL("theme_spread", data.theme_spread),
      PAR_REAL("quality_weight", data.quality_weight),
      PAR_REAL("relevance_noise", data.relevance_noise),
      PAR_REAL("init_noise", data.init_noise),
      PAR_REAL("label_noise", data.label_noise),
      PAR_SIZE("ranker_hidden", data.ranker_hidden),
      PAR_SIZE("ranker_epochs", data.ranker_epochs),
      PAR_REAL("ranker_lr", data.ranker_lr),
      PAR_REAL("eta1", data.eta1),
      PAR_REAL("eta2", data.eta2),
  };
  return table;
}

#undef PAR_SIZE
#undef PAR_REAL
#undef PAR_LIST

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void TrainConfig::validate() const {
  require(layout == "stacked" || layout == "fshape", "layout must be 'stacked' or 'fshape', got '" + layout + "'");
  require(n > 0 && m > 0 && t > 0, "n, m and t must be positive");
  require(d_x > 0 && d_h > 0 && heads > 0 && d_a > 0 && d_o > 0 && d_r > 0, "model dimensions must be positive");
  require(experts > 0 && !expert_hidden.empty(), "experts and expert_hidden must be non-empty");
  for (auto s : dense_hidden) require(s > 0, "dense_hidden entries must be positive");
  for (auto s : expert_hidden) require(s > 0, "expert_hidden entries must be positive");
  for (auto s : tower_hidden) require(s > 0, "tower_hidden entries must be positive");
  require(sigma >= 0.0, "sigma must be non-negative");
  require(lr > 0.0 && l2 >= 0.0, "lr must be positive and l2 non-negative");
  require(batch_size > 0, "batch_size must be positive");
  require(eval_labels == "relevance" || eval_labels == "clicks", "eval_labels must be 'relevance' or 'clicks'");
  require(ablate_seeds > 0, "ablate_seeds must be positive");
  require(data.num_themes >= n, "num_themes must be at least n");
  require(data.items_per_theme >= m, "items_per_theme must be at least m");
  require(data.latent_dim > 0 && data.num_users > 0 && data.user_themes > 0, "latent_dim, num_users and user_themes must be positive");
  require(data.user_themes <= data.num_themes, "user_themes cannot exceed num_themes");
  require(data.pos_per_list <= m, "pos_per_list cannot exceed m");
  require(data.theme_spread >= 0.0 && data.quality_weight >= 0.0 && data.relevance_noise >= 0.0 && data.init_noise >= 0.0,
          "data noise levels must be non-negative");
  require(data.label_noise >= 0.0 && data.label_noise <= 0.5, "label_noise must lie in [0, 0.5]");
  require(data.ranker_hidden > 0 && data.ranker_lr > 0.0, "ranker_hidden and ranker_lr must be positive");
  require(data.eta1 >= 0.0 && data.eta2 >= 0.0, "eta1 and eta2 must be non-negative");
  if (layout == "fshape") require(n >= 2 && m >= n - 1, "fshape needs n >= 2 and m >= n - 1");
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::size_t item_vocab(const DataConfig& data) { return data.num_themes * data.items_per_theme + 1; }
std::size_t category_vocab(const DataConfig& data) { return data.num_themes + 1; }

ModelConfig model_config(const TrainConfig& c) {
  ModelConfig mc;
  mc.n = c.n;
  mc.m = c.m;
  mc.t = c.t;
  mc.item_vocab = item_vocab(c.data);
  mc.cat_vocab = c.use_categories ? category_vocab(c.data) : 0;
  mc.d_x = c.d_x;
  mc.d_h = c.d_h;
  mc.heads = c.heads;
  mc.d_a = c.d_a;
  mc.d_o = c.d_o;
  mc.sigma = c.sigma;
  mc.dense_hidden = c.dense_hidden;
  mc.d_r = c.d_r;
  mc.experts = c.experts;
  mc.expert_hidden = c.expert_hidden;
  mc.tower_hidden = c.tower_hidden;
  mc.ablation = c.ablation;
  return mc;
}

PageLayout make_layout(const TrainConfig& c) {
  if (c.layout == "fshape") return fshape_preset(c.m, c.n - 1, c.m);
  return stacked_preset(c.n, c.m);
}

}  // namespace par
