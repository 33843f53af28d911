#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "satfusion/errors.hpp"
#include "satfusion/metrics.hpp"

using namespace satfusion;

TEST(PrAuc, MatchesExhaustiveThresholdingOn500Draws) {
  const auto out = satfusion::testing::check_pr_auc(500);
  EXPECT_EQ(out.cases, 500u);
  EXPECT_TRUE(out.passed()) << out.first_failure;
}

TEST(PrAuc, KnownValues) {
  // Perfect ranking.
  const std::vector<ScoredLabel> perfect{{0.9, 1}, {0.8, 1}, {0.2, 0}};
  EXPECT_DOUBLE_EQ(pr_auc(perfect), 1.0);
  // Positive ranked last among three: precision 1/3 at full recall.
  const std::vector<ScoredLabel> worst{{0.9, 0}, {0.8, 0}, {0.1, 1}};
  EXPECT_DOUBLE_EQ(pr_auc(worst), 1.0 / 3.0);
  // All tied: one threshold, precision equals prevalence.
  const std::vector<ScoredLabel> tied{{0.5, 1}, {0.5, 0}, {0.5, 0}, {0.5, 1}};
  EXPECT_DOUBLE_EQ(pr_auc(tied), 0.5);
  EXPECT_THROW(pr_auc(std::vector<ScoredLabel>{{0.3, 0}}), DataError);
}

TEST(PrAuc, InvariantToMonotoneRescaling) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredLabel> a(2 + rng.index(40));
    for (auto& p : a) {
      p.score = rng.uniform();
      p.label = rng.bernoulli(0.5);
    }
    a[0].label = 1;
    auto b = a;
    for (auto& p : b) p.score = std::exp(3.0 * p.score) - 7.0;
    EXPECT_NEAR(pr_auc(a), pr_auc(b), 1e-12);
  }
}

TEST(Kappa, MatchesHandFormulaOn100Tables) {
  const auto out = satfusion::testing::check_kappa(100);
  EXPECT_EQ(out.cases, 100u);
  EXPECT_TRUE(out.passed()) << out.first_failure;
}

TEST(Kappa, EdgeCases) {
  // Both raters constant and equal: chance agreement is 1, kappa undefined.
  const std::vector<std::pair<int, int>> same(5, {1, 1});
  const Agreement a = agreement_and_kappa(same);
  EXPECT_DOUBLE_EQ(a.agreement_rate, 1.0);
  EXPECT_FALSE(a.kappa);
  EXPECT_THROW(agreement_and_kappa(std::vector<std::pair<int, int>>{}), DataError);
  EXPECT_THROW(agreement_and_kappa(std::vector<std::pair<int, int>>{{2, 0}}), DataError);
  // Systematic disagreement.
  const std::vector<std::pair<int, int>> flipped{{1, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(*agreement_and_kappa(flipped).kappa, -1.0);
}

TEST(Confusion, PrecisionRecallF1) {
  ConfusionCounts c;
  for (int i = 0; i < 3; ++i) c.add(true, true);
  c.add(true, false);
  c.add(false, true);
  c.add(false, false);
  const PrecisionRecall r = prf(c);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.recall, 0.75);
  EXPECT_DOUBLE_EQ(r.f1, 0.75);
  EXPECT_EQ(c.total(), 6u);
  const PrecisionRecall empty = prf(ConfusionCounts{});
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
}

namespace {

std::vector<ExampleOutcome> outcomes(Rng& rng, std::size_t n, std::size_t domains) {
  std::vector<ExampleOutcome> out(n);
  for (auto& e : out) {
    // Skewed domain sizes.
    const std::size_t d = std::min(rng.index(domains), rng.index(domains));
    e.domain = "D" + std::to_string(d);
    e.label = rng.bernoulli(0.3);
    e.score = std::clamp(0.3 * e.label + rng.uniform(0.0, 0.7), 0.0, 1.0);
    e.predicted = e.score >= 0.5;
  }
  return out;
}

}  // namespace

TEST(Aggregation, MacroIsTheMeanOfPerDomainMetrics) {
  Rng rng(12);
  const auto examples = outcomes(rng, 800, 10);
  const MetricsReport r = macro_report(examples, 20, 1.0);
  ASSERT_EQ(r.domains_used.size(), r.per_domain.size());
  double f1 = 0.0, sq = 0.0;
  for (const auto& d : r.per_domain) f1 += d.metrics.f1;
  f1 /= static_cast<double>(r.per_domain.size());
  for (const auto& d : r.per_domain) sq += (d.metrics.f1 - f1) * (d.metrics.f1 - f1);
  EXPECT_NEAR(r.macro.f1, f1, 1e-12);
  EXPECT_NEAR(*r.macro_std.f1, std::sqrt(sq / static_cast<double>(r.per_domain.size())), 1e-12);
  EXPECT_DOUBLE_EQ(r.coverage, 1.0);
  EXPECT_EQ(r.examples, 800u);

  // Micro metrics pool the counts.
  ConfusionCounts c;
  for (const auto& e : examples) c.add(e.predicted, e.label == 1);
  EXPECT_DOUBLE_EQ(r.micro.f1, prf(c).f1);
}

TEST(Aggregation, DomainSelectionStopsAtTopKOrCoverage) {
  std::vector<ExampleOutcome> ex;
  auto add = [&](const std::string& d, int n) {
    for (int i = 0; i < n; ++i) ex.push_back({d, 0.5, i % 2, i % 2 == 0});
  };
  add("big", 60);
  add("mid", 30);
  add("small", 9);
  add("tiny", 1);
  EXPECT_EQ(select_domains(ex, 2, 1.0), (std::vector<std::string>{"big", "mid"}));
  EXPECT_EQ(select_domains(ex, 20, 0.9), (std::vector<std::string>{"big", "mid"}));
  EXPECT_EQ(select_domains(ex, 20, 0.95), (std::vector<std::string>{"big", "mid", "small"}));
  EXPECT_EQ(select_domains(ex, 20, 1.0).size(), 4u);
}

TEST(Aggregation, StdNeedsTwoValues) {
  EXPECT_FALSE(population_std(std::vector<double>{1.0}));
  EXPECT_DOUBLE_EQ(*population_std(std::vector<double>{1.0, 3.0}), 1.0);
}
