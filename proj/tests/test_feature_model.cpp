#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "protokd/error.hpp"
#include "protokd/feature_model.hpp"

using namespace protokd;

namespace {

PairedFeatureSet two_records() {
  PairedFeatureSet set{2, 3, {}};
  set.records.push_back({1, {0, 0}, {1.0, 2.0}, {0.5, 0.5, 0.5}, {}, {}, {}});
  set.records.push_back({2, {1, 0}, {0.0, -1.0}, {1.0, 0.0, 2.0}, {}, {}, {}});
  return set;
}

}  // namespace

TEST_CASE("validate accepts a well-formed set") {
  CHECK(validate(two_records()).ok());
  CHECK_NOTHROW(require_valid(two_records()));
}

TEST_CASE("validate flags a non-finite student value") {
  auto set = two_records();
  set.records[1].f_s[2] = std::numeric_limits<double>::quiet_NaN();
  const auto report = validate(set);
  REQUIRE(report.violations.size() == 1);
  REQUIRE(report.violations[0].record.has_value());
  CHECK(*report.violations[0].record == 1);
}

TEST_CASE("validate flags duplicate ids") {
  auto set = two_records();
  set.records[1].instance_id = 1;
  CHECK(validate(set).violations.size() == 1);
  try {
    require_valid(set);
    FAIL("expected InvalidSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSet);
  }
}

TEST_CASE("validate: shapes and logits") {
  auto set = two_records();
  set.records[0].f_t.push_back(1.0);
  CHECK_FALSE(validate(set).ok());

  set = two_records();
  set.records[0].logits_t = Vector{1.0, 2.0};
  CHECK_FALSE(validate(set).ok());
  set.records[0].logits_s = Vector{1.0, 2.0};
  CHECK_FALSE(validate(set).ok());  // second record has no logits
  set.records[1].logits_t = Vector{0.0, 0.0};
  set.records[1].logits_s = Vector{0.0, 0.0};
  CHECK(validate(set).ok());
  CHECK(set.has_logits());
  set.records[1].logits_s = Vector{0.0};
  CHECK_FALSE(validate(set).ok());

  CHECK_FALSE(validate(PairedFeatureSet{2, 2, {}}).ok());
}

TEST_CASE("groups are sorted and members keep record order") {
  std::mt19937_64 gen(2);
  auto set = oracle::random_set(gen, {3, 2}, 2, 2);
  std::swap(set.records[0], set.records[4]);
  const auto keys = group_keys(set);
  REQUIRE(keys.size() == 2);
  CHECK(keys[0] < keys[1]);
  CHECK(group_members(set, {1, 0}) == std::vector<std::size_t>{0, 3});
  CHECK(to_string(GroupKey{3, 1}).find('3') != std::string::npos);
}

TEST_CASE("hyperparameter checks") {
  Hyperparams h;
  CHECK_NOTHROW(check_hyperparams(h));
  h.k = 0;
  CHECK_THROWS_AS(check_hyperparams(h), Error);
  h = {};
  h.lambda = -1.0;
  CHECK_THROWS_AS(check_hyperparams(h), Error);
  h = {};
  h.refresh_period = 0;
  CHECK_THROWS_AS(check_hyperparams(h), Error);
  h = {};
  h.temperature = 0.0;
  CHECK_THROWS_AS(check_hyperparams(h), Error);
}
