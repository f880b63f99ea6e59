#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mrstitch/config.hpp"
#include "mrstitch/error.hpp"
#include "test_util.hpp"

using namespace mrstitch;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST_CASE("empty input keeps the defaults") {
  const RunConfig c = parse("");
  const RunConfig d;
  CHECK(c.energy.lambda_d == d.energy.lambda_d);
  CHECK(c.energy.lambda_m == 1e4);
  CHECK(c.registration.iterations == 500);
  CHECK(c.registration.seed_radius.fraction_of_diagonal);
  CHECK(c.registration.seed_radius.value == doctest::Approx(0.15));
  CHECK(c.max_cycles == 100);
  CHECK(c.blend);
  CHECK(c.eval_crop == 0);
  CHECK_FALSE(c.correspondences.has_value());
}

TEST_CASE("settings, comments and whitespace") {
  const RunConfig c = parse(
      "# weights\n"
      "lambda_d = 250   # trailing comment\n"
      "\n"
      "  truncation=raise-mixed\n"
      "r_h = 20%\n"
      "r_d = 12\n"
      "blend = false\n"
      "eval_side = top\n"
      "correspondences = pairs.txt\n");
  CHECK(c.energy.lambda_d == 250.0);
  CHECK(c.energy.truncation == TruncationPolicy::kRaiseMixed);
  CHECK(c.registration.seed_radius.fraction_of_diagonal);
  CHECK(c.registration.seed_radius.value == doctest::Approx(0.2));
  CHECK_FALSE(c.registration.growth_radius.fraction_of_diagonal);
  CHECK(c.registration.growth_radius.value == 12.0);
  CHECK_FALSE(c.blend);
  CHECK(c.eval_side == CropSide::kTop);
  REQUIRE(c.correspondences.has_value());
  CHECK(c.correspondences->string() == "pairs.txt");
}

TEST_CASE("later settings override earlier ones and the base") {
  RunConfig base;
  base.energy.lambda_s = 7;
  std::istringstream in("lambda_d = 1\nlambda_d = 2\n");
  const RunConfig c = parse_config(in, base);
  CHECK(c.energy.lambda_d == 2.0);
  CHECK(c.energy.lambda_s == 7.0);
}

TEST_CASE("errors name the key and line") {
  try {
    parse("lambda_s = 1\nlambda_d = -1\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "lambda_d");
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  try {
    parse("\n\nlambda_q = 3\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "lambda_q");
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("lambda_d 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("lambda_d = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("lambda_d = 5x\n"), ConfigError);
  CHECK_THROWS_AS(parse("tau_h = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("theta_h = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("truncation = sideways\n"), ConfigError);
  CHECK_THROWS_AS(parse("blend = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("scale_min = 3\nscale_max = 2\n"), ConfigError);
}

TEST_CASE("zero duplication weight is allowed") {
  CHECK(parse("lambda_d = 0\n").energy.lambda_d == 0.0);
}

TEST_CASE("command line overrides") {
  const auto [k, v] = split_override("lambda_d=500");
  CHECK(k == "lambda_d");
  CHECK(v == "500");
  CHECK_THROWS_AS(split_override("lambda_d"), ConfigError);
  RunConfig c;
  apply_setting(c, k, v, 0);
  CHECK(c.energy.lambda_d == 500.0);
  CHECK_THROWS_AS(apply_setting(c, "nope", "1", 0), ConfigError);
}

TEST_CASE("every listed key is accepted by the parser") {
  const auto keys = config_keys();
  CHECK(keys.size() >= 30);
  for (const std::string& k : keys) {
    // Each key rejects garbage with an error naming the key, proving it is wired up.
    if (k == "reference" || k == "candidate" || k == "correspondences" || k == "out") continue;
    try {
      RunConfig c;
      apply_setting(c, k, "not-a-value", 5);
      CHECK_MESSAGE(k == "dataset", "accepted garbage: " << k);
    } catch (const ConfigError& e) {
      CHECK(e.key() == k);
    }
  }
}

TEST_CASE("config files") {
  const auto dir = testutil::temp_dir("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "lambda_c = 0.1\nseed = 9\n";
  }
  const RunConfig c = parse_config_file(dir / "run.cfg");
  CHECK(c.energy.lambda_c == doctest::Approx(0.1));
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(parse_config_file(dir / "missing.cfg"), ConfigError);
}
