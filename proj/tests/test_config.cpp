#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "par/checkpoint.hpp"
#include "par/config.hpp"
#include "par/errors.hpp"
#include "par/trainer.hpp"

using namespace par;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

Checkpoint sample_checkpoint() {
  const TrainConfig c = tiny_config();
  ParModel model(model_config(c), make_layout(c), 3);
  return snapshot(model, config_to_text(c), 2, {0.7, 0.5});
}

}  // namespace

TEST_CASE("parsing keeps defaults and reads comments") {
  const TrainConfig c = parse_config("# comment\n\nn = 3  # trailing\nlr=0.001\nexpert_hidden = 8, 4\nablation = dsa,mmoe\n");
  CHECK(c.n == 3);
  CHECK(c.lr == 0.001);
  CHECK(c.expert_hidden == std::vector<std::size_t>{8, 4});
  CHECK(c.ablation.dsa);
  CHECK(c.ablation.mmoe);
  CHECK_FALSE(c.ablation.scale);
  CHECK(c.m == TrainConfig{}.m);
  CHECK(c.ablation.tag() == "PAR-DSA+MMoE");
}

TEST_CASE("bad config input names the problem") {
  CHECK(message_of("colour = red\n").find("colour") != std::string::npos);
  CHECK(message_of("n = four\n").find("'n'") != std::string::npos);
  CHECK(message_of("lr = 1e-3x\n").find("lr") != std::string::npos);
  CHECK(message_of("n\n").find("line 1") != std::string::npos);
  CHECK(message_of("layout = spiral\n").find("spiral") != std::string::npos);
  CHECK(message_of("ablation = nope\n").find("nope") != std::string::npos);
  CHECK(message_of("m = 0\n") != "");
  CHECK(message_of("use_categories = maybe\n") != "");
  CHECK_THROWS_AS(load_config("/nonexistent/par.conf"), ConfigError);
}

TEST_CASE("canonical text round trips") {
  TrainConfig c;
  set_config_value(c, "lr", "0.1");
  set_config_value(c, "sigma", "0.30000000000000004");
  set_config_value(c, "layout", "fshape");
  set_config_value(c, "ablation", "scale");
  c.validate();
  const std::string text = config_to_text(c);
  const TrainConfig back = parse_config(text);
  CHECK(config_to_text(back) == text);
  CHECK(back.sigma == 0.30000000000000004);
  CHECK(back.lr == 0.1);
  CHECK(text.find("ablation = scale\n") != std::string::npos);
  CHECK(config_to_text(TrainConfig{}).find("ablation = none\n") != std::string::npos);
}

TEST_CASE("vocabulary sizes and layout presets") {
  TrainConfig c;
  CHECK(item_vocab(c.data) == c.data.num_themes * c.data.items_per_theme + 1);
  CHECK(category_vocab(c.data) == c.data.num_themes + 1);
  c.use_categories = false;
  CHECK(model_config(c).cat_vocab == 0);
  const PageLayout stacked = make_layout(c);
  CHECK(stacked.num_lists() == c.n);
  CHECK(stacked.max_len() == c.m);
  c.layout = "fshape";
  const PageLayout f = make_layout(c);
  CHECK(f.num_lists() == c.n);
  CHECK(f.max_len() == c.m);
}

TEST_CASE("checkpoint bytes are stable through save and load") {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = ck.serialize();
  CHECK(bytes.substr(0, 8) == "PARCKPT1");
  const Checkpoint back = Checkpoint::deserialize(bytes);
  CHECK(back == ck);
  CHECK(back.serialize() == bytes);

  const auto path = std::filesystem::temp_directory_path() / "par_test_checkpoint.bin";
  ck.save(path.string());
  const Checkpoint loaded = Checkpoint::load(path.string());
  loaded.save(path.string());
  std::ifstream in(path, std::ios::binary);
  const std::string disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(disk == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = sample_checkpoint().serialize();
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad), DataError);
  bad = bytes;
  bad[8] = 9;  // version
  CHECK_THROWS_AS(Checkpoint::deserialize(bad), DataError);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, cut)), DataError);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes + "junk"), DataError);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/ck.bin"), DataError);
}

TEST_CASE("restore needs matching names and shapes") {
  const TrainConfig c = tiny_config();
  ParModel model(model_config(c), make_layout(c), 5);
  const Checkpoint ck = sample_checkpoint();
  restore(model, ck);
  CHECK(snapshot(model, ck.config_text, 2, {0.7, 0.5}) == ck);

  Checkpoint renamed = ck;
  renamed.tensors.front().name = "other";
  CHECK_THROWS_AS(restore(model, renamed), DataError);
  Checkpoint reshaped = ck;
  reshaped.tensors.front().shape.back() += 1;
  CHECK_THROWS_AS(restore(model, reshaped), DataError);
  Checkpoint short_list = ck;
  short_list.tensors.pop_back();
  CHECK_THROWS_AS(restore(model, short_list), DataError);
}
