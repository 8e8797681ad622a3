#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "slqbd/models.hpp"
#include "slqbd/oracle.hpp"

using namespace slqbd;

TEST_CASE("priority spec round-trips through JSON") {
  const std::string text = R"({
    "family": "priority",
    "params": {"lambda1": 1.0, "lambda2": 0.8, "mu": 2.5},
    "truncation": {"levels": 8, "stages": 6}
  })";
  const models::ModelSpec spec = models::ModelSpec::from_json_text(text);
  CHECK(spec.family == models::Family::Priority);
  CHECK(spec.lambda1 == 1.0);
  CHECK(spec.lambda2 == 0.8);
  CHECK(spec.mu == 2.5);
  CHECK(spec.levels == 8);
  CHECK(spec.stages == 6);
  CHECK(spec.offered_load() == doctest::Approx(1.8 / 2.5));

  const models::ModelSpec again =
      models::ModelSpec::from_json_text(spec.to_json_text());
  CHECK(again.family == spec.family);
  CHECK(again.lambda1 == spec.lambda1);
  CHECK(again.levels == spec.levels);
}

TEST_CASE("spec parsing rejects malformed input") {
  CHECK_THROWS_AS(models::ModelSpec::from_json_text("not json"), InputError);
  CHECK_THROWS_AS(models::ModelSpec::from_json_text("[1,2]"), InputError);
  CHECK_THROWS_AS(
      models::ModelSpec::from_json_text(R"({"family": "teleport"})"),
      InputError);
  // Missing mu.
  CHECK_THROWS_AS(models::ModelSpec::from_json_text(R"({
    "family": "priority",
    "params": {"lambda1": 1.0, "lambda2": 0.8},
    "truncation": {"levels": 8, "stages": 6}
  })"),
                  InputError);
  // Missing truncation.
  CHECK_THROWS_AS(models::ModelSpec::from_json_text(R"({
    "family": "priority",
    "params": {"lambda1": 1.0, "lambda2": 0.8, "mu": 2.5}
  })"),
                  InputError);
  CHECK_THROWS_AS(models::ModelSpec::from_file("/nonexistent/spec.json"),
                  InputError);
}

TEST_CASE("batch spec parses string-keyed distributions") {
  const std::string text = R"({
    "family": "batch-priority",
    "params": {"lambda1": 0.5, "lambda2": 0.4, "mu": 2.0},
    "batch1": {"1": 0.6, "2": 0.4},
    "truncation": {"levels": 7, "stages": 6}
  })";
  const models::ModelSpec spec = models::ModelSpec::from_json_text(text);
  CHECK(spec.batch1.at(1) == 0.6);
  CHECK(spec.batch1.at(2) == 0.4);
  CHECK(spec.batch2.at(1) == 1.0); // defaulted
  // E[batch1] = 1.4.
  CHECK(spec.offered_load() == doctest::Approx((0.5 * 1.4 + 0.4) / 2.0));
  CHECK_NOTHROW(models::build_chain(spec));
}

TEST_CASE("batch distribution restrictions") {
  const std::map<int, double> ok{{1, 1.0}};
  // Level-direction batches beyond single steps are out of scope.
  CHECK_THROWS_AS(models::build_batch_priority(0.5, 0.4, 2.0, ok,
                                               {{2, 1.0}}, 7, 6),
                  InputError);
  CHECK_THROWS_AS(models::build_batch_priority(0.5, 0.4, 2.0, ok,
                                               {{1, 0.5}, {2, 0.5}}, 7, 6),
                  InputError);
  // Stage batches must fit under the cap and form a distribution.
  CHECK_THROWS_AS(models::build_batch_priority(0.5, 0.4, 2.0, {{6, 1.0}}, ok,
                                               7, 6),
                  InputError);
  CHECK_THROWS_AS(models::build_batch_priority(0.5, 0.4, 2.0, {{0, 1.0}}, ok,
                                               7, 6),
                  InputError);
  CHECK_THROWS_AS(models::build_batch_priority(0.5, 0.4, 2.0,
                                               {{1, 0.5}, {2, 0.4}}, ok, 7,
                                               6),
                  InputError);
  CHECK_NOTHROW(models::build_batch_priority(0.5, 0.4, 2.0,
                                             {{1, 0.6}, {5, 0.4}}, ok, 7, 6));
}

TEST_CASE("model builders reject nonpositive rates and tiny caps") {
  CHECK_THROWS_AS(models::build_priority(0.0, 0.8, 2.5, 8, 6), InputError);
  CHECK_THROWS_AS(models::build_priority(1.0, 0.8, -2.5, 8, 6), InputError);
  CHECK_THROWS_AS(models::build_priority(1.0, 0.8, 2.5, 1, 6), InputError);
  CHECK_THROWS_AS(models::build_longest_queue(0.6, 2.0, 8, 1), InputError);
}

TEST_CASE("model chains are conservative and single-entrance") {
  const LevelBlockChain chains[] = {
      models::build_priority(1.0, 0.8, 2.5, 7, 6),
      models::build_longest_queue(0.6, 2.0, 7, 6),
      models::build_batch_priority(0.5, 0.4, 2.0, {{1, 0.6}, {2, 0.4}},
                                   {{1, 1.0}}, 7, 6),
      models::build_longest_queue_hetero(0.4, 0.5, 2.0, 7, 7),
  };
  for (const auto& chain : chains) {
    CHECK(validate_generator(chain).ok());
    CHECK(check_des_columns(chain).ok());
  }
}

TEST_CASE("shell partition of the two-queue grid") {
  const LevelBlockChain chain =
      models::build_longest_queue_hetero(0.3, 0.5, 1.0, 21, 21);
  CHECK(chain.num_levels() == 21);
  CHECK(chain.stages_at(0) == 1);
  for (int m = 1; m < 21; ++m)
    CHECK(chain.stages_at(m) == 2 * (21 - m) + 1);
  CHECK(chain.total_states() == 21 * 21);

  // Shells drain through their corner: the entrance of level m sits right
  // after the first arm, and the first arm shrinks with m.
  CHECK(chain.entrance_column(0) == 0);
  for (int m = 1; m <= 5; ++m) CHECK(chain.entrance_column(m) == 21 - m);

  // Walking along a shell changes one queue by one: every within-level
  // block is tridiagonal in the shell order.
  for (int m = 0; m < 21; ++m) {
    const Matrix& W = chain.W(m);
    for (int i = 0; i < W.rows(); ++i)
      for (int j = 0; j < W.cols(); ++j)
        if (std::abs(i - j) >= 2) CHECK(W(i, j) == 0.0);
  }
}

TEST_CASE("shell partition needs a square grid") {
  try {
    models::build_longest_queue_hetero(0.3, 0.5, 1.0, 5, 7);
    FAIL("rectangular grid accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("square") != std::string::npos);
  }
}

TEST_CASE("symmetric rates give a swap-symmetric distribution") {
  const LevelBlockChain chain =
      models::build_longest_queue_hetero(0.4, 0.4, 1.0, 15, 15);
  const SteadyState pi = oracle::direct_steady_state(chain);

  std::map<std::pair<int, int>, double> prob;
  for (int m = 0; m < chain.num_levels(); ++m)
    for (int i = 0; i < chain.stages_at(m); ++i)
      prob[chain.coords()[m][i]] = pi.blocks[m](i);
  double worst = 0;
  for (const auto& [s, p] : prob)
    worst = std::max(worst, std::abs(p - prob.at({s.second, s.first})));
  CHECK(worst < 1e-13);
}

TEST_CASE("offered load per family") {
  models::ModelSpec spec;
  spec.family = models::Family::Priority;
  spec.lambda1 = 1.0;
  spec.lambda2 = 0.8;
  spec.mu = 2.5;
  CHECK(spec.offered_load() == doctest::Approx(0.72));

  spec.family = models::Family::LongestQueue;
  spec.lambda = 0.6;
  spec.mu = 2.0;
  CHECK(spec.offered_load() == doctest::Approx(0.6));

  spec.family = models::Family::LongestQueueHetero;
  spec.lambda1 = 0.4;
  spec.lambda2 = 0.5;
  spec.mu = 2.0;
  CHECK(spec.offered_load() == doctest::Approx(0.45));

  spec.family = models::Family::Raw;
  CHECK(std::isnan(spec.offered_load()));
}

TEST_CASE("overloaded models carry a warning") {
  models::ModelSpec spec;
  spec.family = models::Family::Priority;
  spec.lambda1 = 1.5;
  spec.lambda2 = 0.5;
  spec.mu = 1.0;
  spec.levels = 6;
  spec.stages = 4;
  const LevelBlockChain chain = models::build_chain(spec);
  REQUIRE(chain.meta().warnings.size() == 1);
  CHECK(chain.meta().warnings[0].find("offered load") != std::string::npos);

  spec.lambda1 = 0.2;
  spec.lambda2 = 0.2;
  CHECK(models::build_chain(spec).meta().warnings.empty());
}

TEST_CASE("raw specs carry explicit blocks") {
  const std::string text = R"({
    "family": "raw",
    "blocks": {
      "W": [[[-1.0]], [[-3.0]], [[-2.0]]],
      "U": [[[1.0]], [[1.0]]],
      "D": [[[2.0]], [[2.0]]]
    }
  })";
  const models::ModelSpec spec = models::ModelSpec::from_json_text(text);
  CHECK(spec.family == models::Family::Raw);
  const LevelBlockChain chain = models::build_chain(spec);
  CHECK(chain.num_levels() == 3);
  CHECK(chain.meta().source == "raw");
  // Finite by construction, not by truncation: no stability gate applies.
  CHECK(!chain.meta().level_truncated);
  CHECK(chain.meta().warnings.empty());
  CHECK(validate_generator(chain).ok());

  const models::ModelSpec again =
      models::ModelSpec::from_json_text(spec.to_json_text());
  CHECK(again.raw_W.size() == 3);
  CHECK(again.raw_W[1](0, 0) == -3.0);
}
