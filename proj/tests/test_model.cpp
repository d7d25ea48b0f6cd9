#include <doctest.h>

#include <cmath>

#include "par/errors.hpp"
#include "par/trainer.hpp"

using namespace par;

namespace {

struct Fixture {
  TrainConfig config;
  PageBatch batch;
};

Fixture small_pages() {
  Fixture f;
  f.config = tiny_config();
  f.config.data.train_pages = 6;
  f.config.data.test_pages = 2;
  f.config.data.num_users = 10;
  f.config.validate();
  const auto ds = build_dataset(f.config);
  f.batch = make_batch(ds.pages, f.config);
  return f;
}

bool has_prefix(const ParameterStore& store, const std::string& prefix) {
  for (const auto& name : store.names())
    if (name.rfind(prefix, 0) == 0) return true;
  return false;
}

ParModel build(const TrainConfig& c, const std::string& ablation = "") {
  auto mc = model_config(c);
  mc.ablation = Ablation::parse(ablation);
  return ParModel(mc, make_layout(c), c.seed);
}

}  // namespace

TEST_CASE("every variant scores every slot with a probability") {
  const Fixture f = small_pages();
  const std::size_t pages = f.batch.batch;
  for (const std::string v : {"", "dsa", "hdsa", "scale", "ssa", "dn", "mmoe"}) {
    INFO(v);
    const ParModel model = build(f.config, v);
    const auto out = model.forward(f.batch);
    CHECK(out.scores.shape() == Shape{pages, f.config.n, f.config.m});
    for (double s : out.scores.values()) {
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
    CHECK(std::isfinite(model.loss(f.batch).item()));
  }
}

TEST_CASE("ablations remove exactly their parameters") {
  const TrainConfig c = tiny_config();
  const ParModel full = build(c);
  for (const char* p : {"embedding.item", "hds.dual.", "hds.item.", "hds.list.", "ss.steepness", "ss.query", "dense.",
                        "mmoe.expert", "mmoe.gate", "mmoe.tower"})
    CHECK(has_prefix(full.parameters(), p));
  CHECK_FALSE(has_prefix(full.parameters(), "tower."));

  const ParModel dsa = build(c, "dsa");
  CHECK_FALSE(has_prefix(dsa.parameters(), "hds.dual."));
  CHECK(has_prefix(dsa.parameters(), "hds.item."));
  CHECK(dsa.feature_dim() == full.feature_dim());

  const ParModel hdsa = build(c, "hdsa");
  CHECK_FALSE(has_prefix(hdsa.parameters(), "hds."));
  CHECK(hdsa.feature_dim() == full.feature_dim() - (c.d_x + c.d_h));

  const ParModel scale = build(c, "scale");
  CHECK_FALSE(has_prefix(scale.parameters(), "ss.steepness"));
  CHECK(scale.parameters().size() == full.parameters().size() - 1);

  const ParModel ssa = build(c, "ssa");
  CHECK_FALSE(has_prefix(ssa.parameters(), "ss."));
  CHECK(ssa.feature_dim() == full.feature_dim() - c.d_o);

  const ParModel dn = build(c, "dn");
  CHECK_FALSE(has_prefix(dn.parameters(), "dense."));
  CHECK(dn.feature_dim() == full.feature_dim() - c.d_r);

  const ParModel mmoe = build(c, "mmoe");
  CHECK_FALSE(has_prefix(mmoe.parameters(), "mmoe."));
  CHECK(has_prefix(mmoe.parameters(), "tower."));

  CHECK_THROWS_AS(build(c, "hdsa,ssa,dn"), ConfigError);
}

TEST_CASE("ablation tags") {
  CHECK(Ablation{}.tag() == "PAR");
  CHECK(Ablation::variant("scale").tag() == "PAR-scale");
  CHECK(Ablation::variant("mmoe").tag() == "PAR-MMoE");
  CHECK(Ablation::parse("none") == Ablation{});
  CHECK(Ablation::parse("") == Ablation{});
  for (const auto& name : ablation_names()) CHECK(Ablation::variant(name).any());
  CHECK_THROWS_AS(Ablation::variant("par"), ConfigError);
}

TEST_CASE("the same seed builds the same model") {
  const TrainConfig c = tiny_config();
  const ParModel a = build(c), b = build(c);
  for (std::size_t k = 0; k < a.parameters().size(); ++k) {
    const auto x = a.parameters().entries()[k].tensor.values();
    const auto y = b.parameters().entries()[k].tensor.values();
    CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
}

TEST_CASE("layout and batch shapes are checked") {
  TrainConfig c = tiny_config();
  auto mc = model_config(c);
  mc.m = 2;
  CHECK_THROWS_AS(ParModel(mc, make_layout(c), 1), ConfigError);
  const Fixture f = small_pages();
  TrainConfig wider = f.config;
  wider.t = 1;
  CHECK_THROWS_AS(build(wider).forward(f.batch), ConfigError);
}

TEST_CASE("labels of padded slots are ignored") {
  Fixture f = small_pages();
  const ParModel model = build(f.config);
  f.batch.mask.back() = 0.0;
  f.batch.items.back() = 0;
  f.batch.item_cats.back() = 0;
  const double padded = model.loss(f.batch).item();
  f.batch.labels.back() = 1.0 - f.batch.labels.back();
  CHECK(model.loss(f.batch).item() == padded);
  CHECK(std::isfinite(padded));
}

TEST_CASE("full model gradients on the tiny config") {
  for (const std::string v : {"", "dsa", "scale", "mmoe"}) {
    TrainConfig c = tiny_config();
    c.ablation = Ablation::parse(v);
    const auto report = gradcheck(c);
    for (const auto& e : report.entries) INFO(v << " " << e.name << " " << e.max_rel_error);
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-4);
  }
  TrainConfig big = tiny_config();
  big.m = 4;
  big.data.items_per_theme = 4;
  CHECK_THROWS_AS(gradcheck(big), ConfigError);
}
