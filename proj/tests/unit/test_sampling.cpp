#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "ncpd/error.hpp"
#include "ncpd/sampling.hpp"

using namespace ncpd;

TEST(SplitSequence, FloorThenRemainderToTest) {
  const auto s = split_sequence(10, 0.5, 0.2, 0.3);
  EXPECT_EQ(s.train, (TimeRange{1, 5}));
  EXPECT_EQ(s.validation, (TimeRange{6, 7}));
  EXPECT_EQ(s.test, (TimeRange{8, 10}));
  const auto h = split_sequence(100, 0.5, 0.2, 0.3);
  EXPECT_EQ(h.train.length(), 50u);
  EXPECT_EQ(h.validation.length(), 20u);
  EXPECT_EQ(h.test.length(), 30u);
  EXPECT_THROW(split_sequence(10, 1.0, 0.0, 0.0), ParameterError);
  EXPECT_THROW(split_sequence(2, 0.4, 0.3, 0.3), ParameterError);
  EXPECT_THROW(split_sequence(10, 0.5, 0.5, 0.5), ParameterError);
}

TEST(SameSegmentLabel, BoundaryBelongsToNewRegime) {
  const std::vector<std::size_t> cps{6};
  EXPECT_EQ(same_segment_label(5, 6, cps), 0);
  EXPECT_EQ(same_segment_label(6, 10, cps), 1);
  EXPECT_EQ(same_segment_label(9, 2, cps), 0);
  EXPECT_EQ(same_segment_label(1, 5, cps), 1);
}

TEST(RandomScheme, BalancedAndLabelled) {
  std::mt19937_64 rng(3);
  const std::vector<std::size_t> cps{6};
  const auto d = random_scheme({1, 10}, cps, 4, rng);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.count_label(1), 2u);
  EXPECT_EQ(d.count_label(0), 2u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : d.pairs) {
    EXPECT_EQ(p.label, same_segment_label(p.t1, p.t2, cps));
    EXPECT_TRUE(seen.insert({p.t1, p.t2}).second);
  }
}

TEST(RandomScheme, DefaultSizeAndErrors) {
  std::mt19937_64 rng(4);
  const std::vector<std::size_t> cps{30};
  EXPECT_EQ(random_scheme({1, 50}, cps, std::nullopt, rng).size(), 500u);
  try {
    random_scheme({1, 10}, {}, 4, rng);
    FAIL() << "expected an error";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("label 0"), std::string::npos);
  }
  EXPECT_THROW(random_scheme({1, 10}, cps, 3, rng), ParameterError);
}

TEST(WindowedScheme, HandCasesAndCount) {
  const auto d = windowed_scheme({1, 3}, {}, 1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.pairs[0], (PairExample{1, 2, 1}));
  EXPECT_EQ(d.pairs[1], (PairExample{2, 3, 1}));
  EXPECT_EQ(windowed_scheme({101, 157}, {}, 12).size(), 684u);
  EXPECT_EQ(windowed_scheme({1, 57}, {}, 12).size(), 606u);
  const auto back = windowed_scheme({5, 5}, {}, 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.pairs[0], (PairExample{3, 5, 1}));
}

TEST(WindowedScheme, MatchesBruteForceEnumeration) {
  for (std::size_t m = 1; m <= 50; ++m) {
    for (std::size_t L : {1u, 3u, 7u, 60u}) {
      const std::vector<std::size_t> cps{m / 2 + 1};
      std::size_t expected = 0;
      const std::size_t first = m / 3 + 1;
      for (std::size_t a = 1; a <= m; ++a)
        for (std::size_t b = a + 1; b <= m; ++b) expected += (b - a <= L && b >= first);
      const auto d = windowed_scheme({first, m}, cps, L);
      ASSERT_EQ(d.size(), expected);
      for (const auto& p : d.pairs) EXPECT_EQ(p.label, same_segment_label(p.t1, p.t2, cps));
    }
  }
}

TEST(CenteredValidationWindow, StaysInRange) {
  std::mt19937_64 rng(1);
  const std::vector<std::size_t> cps{10, 200};
  for (int i = 0; i < 20; ++i) {
    const auto w = centered_validation_window(220, cps, 60, rng);
    EXPECT_EQ(w.length(), 60u);
    EXPECT_GE(w.first, 1u);
    EXPECT_LE(w.last, 220u);
  }
}

TEST(PairsCsv, RoundTripAndParseErrors) {
  PairDataset d;
  d.pairs = {{1, 2, 1}, {3, 9, 0}};
  std::stringstream ss;
  write_pairs_csv(ss, d, "seed=1");
  EXPECT_EQ(read_pairs_csv(ss).pairs, d.pairs);
  std::stringstream bad("t1,t2,label\n1,2,1\n3,x,0\n");
  try {
    read_pairs_csv(bad);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
