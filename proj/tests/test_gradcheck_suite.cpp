#include <doctest.h>

#include "dot/errors.hpp"
#include "dot/gradcheck_suite.hpp"

using namespace dot;

TEST_CASE("gradcheck suite covers every operation and passes") {
  SuiteOptions opts;
  opts.trials = 5;
  const auto cases = run_gradcheck_suite(opts);
  REQUIRE(cases.size() == 9);
  for (const auto& c : cases) {
    INFO(c.name << " rel=" << c.max_rel_error << " kinks=" << c.kinks);
    CHECK(c.passed());
    CHECK(c.trials == 5);
    CHECK(c.checked > 0);
  }
}

TEST_CASE("gradcheck suite is seed-deterministic") {
  SuiteOptions opts;
  opts.trials = 2;
  opts.seed = 9;
  const auto a = run_gradcheck_suite(opts), b = run_gradcheck_suite(opts);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].max_rel_error == b[i].max_rel_error);
  opts.trials = 0;
  CHECK_THROWS_AS(run_gradcheck_suite(opts), ValidationError);
}
