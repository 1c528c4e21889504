#include <gtest/gtest.h>

#include "litecd/evaluator.hpp"
#include "litecd/rng.hpp"

using namespace litecd;

namespace {

ChangeMask random_mask(std::size_t h, std::size_t w, Rng& rng, double p) {
  ChangeMask m(h, w);
  for (auto& v : m.values) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

ConfusionCounts counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fa, std::uint64_t ma) {
  ConfusionCounts c;
  c.tp = tp;
  c.tn = tn;
  c.fa = fa;
  c.ma = ma;
  return c;
}

}  // namespace

TEST(Confusion, MatchesCountingOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto pred = random_mask(16, 16, rng, 0.4), ref = random_mask(16, 16, rng, 0.3);
    std::uint64_t tp = 0, tn = 0, fa = 0, ma = 0;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const int p = pred.at(y, x), r = ref.at(y, x);
        tp += p == 1 && r == 1;
        tn += p == 0 && r == 0;
        fa += p == 1 && r == 0;
        ma += p == 0 && r == 1;
      }
    EXPECT_EQ(confusion(pred, ref), counts(tp, tn, fa, ma));
  }
}

TEST(Confusion, IdentityAndComplement) {
  Rng rng(2);
  const auto ref = random_mask(10, 12, rng, 0.3);
  const auto same = confusion(ref, ref);
  EXPECT_EQ(same.fa, 0u);
  EXPECT_EQ(same.ma, 0u);
  ChangeMask inv = ref;
  for (auto& v : inv.values) v = 1 - v;
  const auto flip = confusion(inv, ref);
  EXPECT_EQ(flip.tp, 0u);
  EXPECT_EQ(flip.tn, 0u);
}

TEST(Confusion, SwappingArgumentsSwapsErrors) {
  Rng rng(3);
  const auto a = random_mask(20, 20, rng, 0.5), b = random_mask(20, 20, rng, 0.2);
  const auto ab = confusion(a, b), ba = confusion(b, a);
  EXPECT_EQ(ab.fa, ba.ma);
  EXPECT_EQ(ab.ma, ba.fa);
  EXPECT_EQ(ab.tp, ba.tp);
  EXPECT_EQ(ab.tn, ba.tn);
  EXPECT_EQ(ab.total(), 400u);
  EXPECT_EQ(ab.nc(), ab.tn + ab.fa);
  EXPECT_EQ(ab.c(), ab.tp + ab.ma);
}

TEST(Confusion, Contracts) {
  EXPECT_THROW(confusion(ChangeMask(4, 4), ChangeMask(4, 5)), ContractViolation);
  ChangeMask bad(2, 2, 0);
  bad.values[1] = 2;
  EXPECT_THROW(confusion(bad, ChangeMask(2, 2)), ContractViolation);
}

TEST(Kappa, HandComputedFixture) {
  // p_o = 0.85, p_e = (50*55 + 50*45) / 100^2 = 0.5
  EXPECT_NEAR(kappa(counts(45, 40, 10, 5)), 0.7, 1e-9);
}

TEST(Kappa, ChanceAgreementAndPerfect) {
  EXPECT_NEAR(kappa(counts(25, 25, 25, 25)), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(kappa(counts(10, 90, 0, 0)), 1.0);
  EXPECT_THROW(kappa(ConfusionCounts{}), ContractViolation);
}

TEST(Kappa, DegenerateSingleClassIsZeroAndFlagged) {
  const auto c = counts(0, 100, 0, 0);
  EXPECT_TRUE(kappa_degenerate(c));
  EXPECT_EQ(kappa(c), 0.0);
  const auto r = report(c);
  EXPECT_TRUE(r.kappa_degenerate);
  ASSERT_TRUE(r.p_fa.has_value());
  EXPECT_EQ(*r.p_fa, 0.0);
}

TEST(Kappa, ScaleInvariantAndBounded) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto c = counts(rng.index(1000), rng.index(1000), rng.index(1000), rng.index(1000) + 1);
    const double k = kappa(c);
    EXPECT_LE(k, 1.0);
    EXPECT_GE(k, -1.0);
    const auto scaled = counts(c.tp * 7, c.tn * 7, c.fa * 7, c.ma * 7);
    EXPECT_NEAR(kappa(scaled), k, 1e-12);
  }
}

TEST(Kappa, OneOnlyWithoutErrors) {
  EXPECT_DOUBLE_EQ(kappa(counts(3, 5, 0, 0)), 1.0);
  EXPECT_LT(kappa(counts(3, 5, 1, 0)), 1.0);
  EXPECT_LT(kappa(counts(3, 5, 0, 1)), 1.0);
}

TEST(Report, RatesUseNonChangedDenominatorByDefault) {
  const auto c = counts(30, 95, 5, 10);  // nc = 100, c = 40
  const auto r = report(c);
  EXPECT_DOUBLE_EQ(*r.p_fa, 0.05);
  EXPECT_DOUBLE_EQ(*r.p_ma, 0.10);
  const auto rc = report(c, PmaDenominator::Changed);
  EXPECT_DOUBLE_EQ(*rc.p_fa, 0.05);
  EXPECT_DOUBLE_EQ(*rc.p_ma, 0.25);
  EXPECT_EQ(rc.kappa, r.kappa);
}

TEST(Report, UndefinedRatesPrintNA) {
  const auto r = report(counts(10, 0, 0, 0));  // nc == 0
  EXPECT_FALSE(r.p_fa.has_value());
  EXPECT_FALSE(r.p_ma.has_value());
  EXPECT_EQ(csv_row("x", r), "x,NA,NA,0.000000");
}

TEST(Report, CsvRowFormat) {
  EXPECT_EQ(csv_row("fixture", report(counts(45, 40, 10, 5))), "fixture,0.200000,0.100000,0.700000");
  Rng rng(5);
  const auto m = random_mask(8, 8, rng, 0.3);
  EXPECT_EQ(csv_row("same", report(m, m)), "same,0.000000,0.000000,1.000000");
  EXPECT_EQ(parse_pma_denominator("changed"), PmaDenominator::Changed);
  EXPECT_THROW(parse_pma_denominator("all"), ContractViolation);
}

TEST(ErrorMap, Encoding) {
  ChangeMask pred(1, 4), ref(1, 4);
  pred.values = {1, 1, 0, 0};
  ref.values = {1, 0, 1, 0};
  EXPECT_EQ(error_map(pred, ref).values, (std::vector<std::uint8_t>{0, 128, 255, 0}));
}
