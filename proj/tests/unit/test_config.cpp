#include <doctest.h>

#include "dsch/config.hpp"
#include "dsch/io.hpp"
#include "support.hpp"

using namespace dsch;
using nlohmann::json;

TEST_CASE("empty object yields defaults") {
  const RunConfig c = RunConfig::from_json(json::object());
  const TrainConfig d;
  CHECK(c.train.code_length == d.code_length);
  CHECK(c.train.m1 == d.m1);
  CHECK(c.train.variant == Variant::Full);
  CHECK(c.map_k == 5000);
  CHECK(c.precision_k == std::vector<std::size_t>{100, 500, 1000, 5000});
  CHECK(c.features.empty());
}

TEST_CASE("keys map onto fields; to_json round-trips") {
  const json doc = {{"r", 32},       {"m1", 20},          {"m2", 5},          {"lambda", 0.5},
                    {"seed", 9},     {"variant", "Base"}, {"map_k", 50},      {"precision_k", {10, 20}},
                    {"features", "x.feat"}, {"diagonal_covariance", true}, {"record_timings", false}};
  const RunConfig c = RunConfig::from_json(doc);
  CHECK(c.train.code_length == 32);
  CHECK(c.train.m1 == 20);
  CHECK(c.train.m2 == 5);
  CHECK(c.train.lambda == 0.5);
  CHECK(c.train.seed == 9);
  CHECK(c.train.variant == Variant::Base);
  CHECK(c.train.diagonal_covariance);
  CHECK_FALSE(c.train.record_timings);
  CHECK(c.features == "x.feat");
  const EvalOptions e = c.eval_options();
  CHECK(e.map_k == 50);
  CHECK(e.precision_ks == std::vector<std::size_t>{10, 20});

  const RunConfig again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
}

TEST_CASE("unknown keys, wrong types and invalid values are rejected") {
  CHECK_THROWS_AS((void)RunConfig::from_json({{"learning_rat", 1e-3}}), ContractError);
  CHECK_THROWS_AS((void)RunConfig::from_json({{"r", "sixteen"}}), ContractError);
  CHECK_THROWS_AS((void)RunConfig::from_json({{"variant", "Bogus"}}), ContractError);
  CHECK_THROWS_AS((void)RunConfig::from_json({{"m1", 4}, {"m2", 5}}), ContractError);
  CHECK_THROWS_AS((void)RunConfig::from_json({{"map_k", 0}}), ContractError);
  CHECK_THROWS_AS((void)RunConfig::from_json(json::array()), ContractError);
  try {
    (void)RunConfig::from_json({{"epoch", 3}});
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("load: syntax error carries the byte offset, contract errors name the file") {
  const test::ScratchDir dir("config");
  io::write_text(dir.file("bad.json"), "{\"r\": 16,, }");
  try {
    (void)RunConfig::load(dir.file("bad.json"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 10);
    CHECK(e.path() == dir.file("bad.json"));
  }
  io::write_text(dir.file("unknown.json"), "{\"colour\": 1}");
  try {
    (void)RunConfig::load(dir.file("unknown.json"));
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find(dir.file("unknown.json")) != std::string::npos);
  }
  io::write_text(dir.file("ok.json"), "{\"r\": 8, \"m1\": 4, \"m2\": 2}");
  CHECK(RunConfig::load(dir.file("ok.json")).train.code_length == 8);
}
