#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ncpd/detection.hpp"
#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"

using namespace ncpd;

namespace {

Series series(std::size_t first, std::vector<double> v) { return Series{first, std::move(v)}; }

// Rule applied literally at every t: look back over [t − L, t).
std::vector<std::size_t> naive_detect(const Series& z, std::size_t L, double theta) {
  std::vector<std::size_t> out;
  for (std::size_t t = z.first; t <= z.last(); ++t) {
    if (!(z.at(t) <= theta)) continue;
    std::size_t available = 0;
    bool all_above = true;
    for (std::size_t tp = (t > L ? t - L : 1); tp < t; ++tp) {
      if (tp < z.first) continue;
      ++available;
      all_above = all_above && z.at(tp) > theta;
    }
    if (available > 0 && all_above) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(SimilarityStatistic, ConstantAndMean) {
  const auto z = similarity_statistic([](std::size_t, std::size_t) { return 1.0; }, 10, 3);
  EXPECT_EQ(z.first, 4u);
  EXPECT_EQ(z.size(), 7u);
  for (double v : z.values) EXPECT_EQ(v, 1.0);
  const std::vector<double> lag{0.9, 0.7, 0.8};
  const auto m = similarity_statistic([&](std::size_t t, std::size_t s) { return t == 4 ? lag[t - s - 1] : 0.0; }, 4, 3);
  EXPECT_NEAR(m.values[0], 0.8, 1e-15);
  EXPECT_THROW(similarity_statistic([](std::size_t, std::size_t) { return 0.0; }, 5, 5), ParameterError);
}

TEST(SimilarityStatistic, MonotoneInScore) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  Matrix a(30, 30);
  for (auto& v : a.data()) v = u(rng);
  const auto lo = similarity_statistic([&](std::size_t t, std::size_t s) { return a(t - 1, s - 1); }, 30, 4);
  const auto hi = similarity_statistic([&](std::size_t t, std::size_t s) { return a(t - 1, s - 1) + 0.01; }, 30, 4);
  for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_GT(hi.values[i], lo.values[i]);
}

TEST(SimilarityStatistic, NetworkOverloadUsesSnapshots) {
  std::vector<Graph> snaps;
  for (int t = 0; t < 6; ++t) snaps.push_back(Graph::empty(t < 3 ? 2 : 2));
  const DynamicNetwork net(snaps);
  const auto z = similarity_statistic([](const Graph& a, const Graph& b) { return a == b ? 1.0 : 0.0; }, net, 2);
  EXPECT_EQ(z.values, std::vector<double>(4, 1.0));
}

TEST(DetectOnline, HandCases) {
  EXPECT_EQ(detect_online(series(3, {0.9, 0.8, 0.4}), 2, 0.5), (std::vector<std::size_t>{5}));
  EXPECT_TRUE(detect_online(series(3, {0.9, 0.8, 0.7}), 2, 0.5).empty());
  EXPECT_TRUE(detect_online(series(3, {0.4, 0.4, 0.4}), 2, 0.5).empty());
  // Distance orientation mirrors the rule.
  EXPECT_EQ(detect_online(series(3, {0.1, 0.2, 0.9}), 2, 0.5, Orientation::DistanceRises),
            (std::vector<std::size_t>{5}));
}

TEST(DetectOnline, MatchesNaiveRuleOnRandomTraces) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t L = 1 + trial % 6;
    std::vector<double> v(5 + trial % 40);
    for (auto& x : v) x = u(rng) < 0.8 ? 0.6 + 0.4 * u(rng) : 0.5 * u(rng);
    const Series z = series(L + 1, v);
    ASSERT_EQ(detect_online(z, L, 0.55), naive_detect(z, L, 0.55));
  }
}

TEST(Localize, ArgMinAndMaxIncrement) {
  const Series z = series(1, {0.9, 0.9, 0.2, 0.9});
  EXPECT_EQ(localize_single_offline(z, Localisation::ArgMin), 3u);
  EXPECT_EQ(localize_single_offline(z, Localisation::MaxIncrement), 3u);
  EXPECT_EQ(localize_single_offline(series(7, {0.5, 0.5, 0.5}), Localisation::ArgMin), 7u);
  EXPECT_EQ(localize_single_offline(series(1, {0.1, 0.3, 0.2}), Localisation::ArgMin, Orientation::DistanceRises), 2u);
  EXPECT_THROW(localize_single_offline(series(1, {0.1}), Localisation::MaxIncrement), ParameterError);
}

TEST(Mmd, ConstantKernels) {
  for (std::size_t L : {1u, 3u, 5u}) {
    const auto zero = mmd_statistic([](std::size_t, std::size_t) { return 0.0; }, 30, L);
    EXPECT_EQ(zero.first, L + 2);
    EXPECT_EQ(zero.last(), 30 - L);
    for (double v : zero.values) EXPECT_EQ(v, 0.0);
    const double c = 0.37;
    const auto cst = mmd_statistic([&](std::size_t, std::size_t) { return c; }, 30, L);
    for (double v : cst.values) EXPECT_NEAR(v, std::sqrt(c * (L + 1.0) / L), 1e-14);
  }
  EXPECT_THROW(mmd_statistic([](std::size_t, std::size_t) { return 0.0; }, 7, 3), ParameterError);
}

TEST(Mmd, MatchesDoubleSumOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 12 + trial % 10;
    const std::size_t L = 1 + trial % 4;
    Matrix s(T, T);
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = i; j < T; ++j) s(i, j) = s(j, i) = u(rng);
    auto f = [&](std::size_t a, std::size_t b) { return s(a - 1, b - 1); };
    const auto z = mmd_statistic(f, T, L);
    for (std::size_t t = L + 2; t <= T - L; ++t) {
      double acc = 0.0;
      for (std::size_t i = 1; i <= L + 1; ++i)
        for (std::size_t j = 1; j <= L + 1; ++j) {
          acc += s(t - i - 1, t - j - 1);
          acc += s(t - 1 + i - 1, t - 1 + j - 1);
          acc -= s(t - i - 1, t - 1 + j - 1);
        }
      acc /= static_cast<double>(L * (L + 1));
      EXPECT_NEAR(z.at(t), std::sqrt(std::max(0.0, acc)), 1e-10);
    }
  }
}

TEST(Calibrate, SeparableTraceReturnsSmallestPerfectThreshold) {
  // High before the change at 12, low after.
  const Series z = series(4, {0.9, 0.95, 0.92, 0.91, 0.93, 0.9, 0.94, 0.96, 0.2, 0.25, 0.3, 0.22});
  const std::vector<std::size_t> cps{12};
  const auto c = calibrate_threshold(z, cps, 3);
  EXPECT_DOUBLE_EQ(c.f1, 1.0);
  EXPECT_NEAR(c.theta, 0.5 * (0.2 + 0.22), 1e-15);
  EXPECT_TRUE(c.warning.empty());
}

TEST(Calibrate, ConstantTraceWarns) {
  const auto c = calibrate_threshold(series(2, {0.7, 0.7, 0.7}), std::vector<std::size_t>{3}, 1);
  EXPECT_DOUBLE_EQ(c.f1, 0.0);
  EXPECT_DOUBLE_EQ(c.theta, 0.7);
  EXPECT_FALSE(c.warning.empty());
  EXPECT_THROW(calibrate_threshold(Series{}, {}, 1), ParameterError);
}

TEST(Calibrate, EqualsExhaustiveSweep) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t L = 1 + trial % 3;
    const std::size_t n = 10 + trial % 15;
    std::vector<double> v(n);
    for (auto& x : v) x = std::round(u(rng) * 20.0) / 20.0;
    const Series z = series(L + 1, v);
    const std::size_t T = z.last();
    const std::vector<std::size_t> cps{L + 1 + n / 2};
    for (auto orientation : {Orientation::SimilarityFalls, Orientation::DistanceRises}) {
      const auto c = calibrate_threshold(z, cps, L, orientation);
      std::vector<double> vals = v;
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      double best_f1 = -1.0;
      double best_theta = 0.0;
      // Candidates in the statistic's own units; the most conservative wins ties.
      std::vector<double> cand;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) cand.push_back(0.5 * (vals[i] + vals[i + 1]));
      if (orientation == Orientation::DistanceRises) std::reverse(cand.begin(), cand.end());
      for (double theta : cand) {
        const double f1 = adjusted_f1(detect_online(z, L, theta, orientation), cps, T).f1;
        if (f1 > best_f1) {
          best_f1 = f1;
          best_theta = theta;
        }
      }
      ASSERT_DOUBLE_EQ(c.f1, best_f1);
      ASSERT_NEAR(c.theta, best_theta, 1e-12);
    }
  }
}

TEST(Calibrate, WithoutChangePointsMinimisesDeclarations) {
  const Series z = series(2, {0.9, 0.8, 0.3, 0.9, 0.85, 0.95});
  const auto c = calibrate_threshold(z, {}, 1);
  EXPECT_TRUE(detect_online(z, 1, c.theta).empty());
}

TEST(Calibrate, PooledMatchesExhaustiveMeanF1) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + trial % 3;
    std::vector<Series> zs;
    std::vector<std::vector<std::size_t>> cps;
    std::vector<double> pooled;
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> v(8 + (trial + k) % 7);
      for (auto& x : v) x = std::round(u(rng) * 10.0) / 10.0;
      pooled.insert(pooled.end(), v.begin(), v.end());
      zs.push_back(series(L + 1, v));
      // The last series is stationary and must not count.
      cps.push_back(k == 2 ? std::vector<std::size_t>{} : std::vector<std::size_t>{L + 1 + v.size() / 2});
    }
    const auto c = calibrate_threshold(zs, cps, L);
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
    if (pooled.size() < 2) continue;
    double best = -1.0;
    double best_theta = 0.0;
    for (std::size_t i = 0; i + 1 < pooled.size(); ++i) {
      const double theta = 0.5 * (pooled[i] + pooled[i + 1]);
      double f1 = 0.0;
      for (std::size_t k = 0; k < 2; ++k)
        f1 += adjusted_f1(detect_online(zs[k], L, theta), cps[k], zs[k].last()).f1 / 2.0;
      if (f1 > best + 1e-12) {
        best = f1;
        best_theta = theta;
      }
    }
    EXPECT_NEAR(c.f1, best, 1e-12) << trial;
    EXPECT_NEAR(c.theta, best_theta, 1e-12) << trial;
  }
}

TEST(Calibrate, SingleSeriesIsPooledOfOne) {
  const Series z = series(3, {0.9, 0.8, 0.95, 0.4, 0.5, 0.9, 0.85, 0.3, 0.9});
  const std::vector<std::size_t> truth{6};
  const auto a = calibrate_threshold(z, truth, 2);
  const std::vector<Series> zs{z};
  const std::vector<std::vector<std::size_t>> ts{truth};
  const auto b = calibrate_threshold(zs, ts, 2);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.f1, b.f1);
}

TEST(Trace, CsvRoundTrip) {
  const auto tr = make_trace(series(3, {0.9, 0.8, 0.4, 0.9}), 2, 0.5, Orientation::SimilarityFalls);
  EXPECT_EQ(tr.declared, (std::vector<std::size_t>{5}));
  std::stringstream ss;
  write_trace_csv(ss, tr, "config_hash=x");
  const std::string text = ss.str();
  EXPECT_NE(text.find("5,0.40000000000000002,1"), std::string::npos);
  EXPECT_EQ(read_trace_csv(ss), tr.statistic);
}

TEST(Increments, AbsoluteDifferences) {
  const auto d = increments(series(4, {1.0, 0.5, 0.75}));
  EXPECT_EQ(d.first, 5u);
  EXPECT_EQ(d.values, (std::vector<double>{0.5, 0.25}));
}
