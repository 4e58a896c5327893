#include <gtest/gtest.h>

#include <algorithm>

#include "hypergpa/gradsuite.hpp"

using namespace hypergpa;

TEST(GradSuite, CaseNamesAreUnique) {
  auto names = grad_case_names();
  ASSERT_FALSE(names.empty());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
}

TEST(GradSuite, FilterSelectsCases) {
  const auto cases = run_grad_suite(0, "gru_step");
  ASSERT_EQ(cases.size(), 2u);
  for (const GradCase& c : cases) EXPECT_NE(c.name.find("gru_step"), std::string::npos);
  EXPECT_EQ(run_grad_suite(0, "no-such-case").size(), 0u);
}

TEST(GradSuite, EveryCaseMatchesFiniteDifferences) {
  for (const GradCase& c : run_grad_suite(0)) {
    EXPECT_TRUE(c.passed()) << c.name << " max_rel_error " << c.result.max_rel_error << " tol " << c.tolerance;
    EXPECT_GT(c.result.entries_checked, 0u) << c.name;
  }
}
