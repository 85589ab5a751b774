#include <doctest.h>

#include <set>

#include "pcle/config.hpp"
#include "pcle/error.hpp"

using namespace pcle;

TEST_CASE("key-value parsing") {
  const KeyValues kv = parse_key_values("# comment\n a = 1 \n\nb=two words # trailing\nc =\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "two words");
  CHECK(kv.at("c") == "");
  CHECK(parse_key_values(format_key_values(kv)) == kv);

  CHECK_THROWS_AS(parse_key_values("novalue\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values(" = 3\n"), ConfigError);
  CHECK_THROWS_AS(load_key_values("/nonexistent/config.txt"), IoError);
}

TEST_CASE("presets") {
  const RunConfig paper = RunConfig::from_preset("paper");
  CHECK(paper.train.epochs == 1000);
  CHECK(paper.train.eval_every == 100);
  CHECK(paper.train.batch_size == 8);
  CHECK(paper.train.crop_size == 340);
  const RunConfig desk = RunConfig::from_preset("desk");
  CHECK(desk.preset == "desk");
  CHECK(desk.train.epochs < paper.train.epochs);
  CHECK_NOTHROW(desk.validate());
  CHECK_THROWS_AS(RunConfig::from_preset("huge"), ConfigError);
}

TEST_CASE("snapshot round trip") {
  RunConfig c = RunConfig::from_preset("desk");
  c.set("seed", "77");
  c.set("lr.initial", "0.000123456789012345");
  c.set("noise.sigma_add", "0.1");
  c.set("degrade.kernel", "bicubic");
  c.set("network.channels", "16");
  c.set("video.frames", "7");

  RunConfig d = RunConfig::from_preset("paper");
  d.apply(c.to_key_values());
  CHECK(d.to_key_values() == c.to_key_values());
  CHECK(d.seed == 77);
  CHECK(d.train.lr.lr0 == 0.000123456789012345);
  CHECK(d.training_noise.sigma_add == 0.1);
  CHECK(d.train.degrade.kernel == KernelKind::bicubic);
  CHECK(d.train.network.channels == 16);
  CHECK(d.video.frames == 7);
}

TEST_CASE("every key is documented") {
  std::set<std::string> documented;
  for (const ConfigKeyDoc& k : config_key_docs()) {
    documented.insert(k.key);
    CHECK_FALSE(k.description.empty());
  }
  for (const auto& [key, value] : RunConfig{}.to_key_values()) CHECK_MESSAGE(documented.count(key) == 1, key);
}

TEST_CASE("bad values") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("train.nope", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "ten"), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "10x"), ConfigError);
  CHECK_THROWS_AS(c.set("degrade.kernel", "lanczos"), ConfigError);
  c.set("backend", "neon");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.backend = "scalar";
  c.set("train.eval_every", "7");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("resolved training config") {
  RunConfig c = RunConfig::from_preset("desk");
  c.seed = 9;
  c.threads = 2;
  c.training_noise.sigma_add = 0.2;
  c.train.degrade.noise = NoiseParams::off();
  TrainConfig t = c.resolved_train();
  CHECK(t.seed == 9);
  CHECK(t.threads == 2);
  CHECK_FALSE(t.degrade.noise.enabled);

  c.set("degrade.noise", "on");
  t = c.resolved_train();
  CHECK(t.degrade.noise.enabled);
  CHECK(t.degrade.noise.sigma_add == 0.2);
}
