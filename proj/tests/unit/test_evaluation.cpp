#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>

#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"

using namespace ncpd;

namespace {

// Maximum one-to-one matching within tolerance by exhaustive search.
std::size_t optimal_matches(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                            std::size_t tol, std::size_t i = 0, std::vector<bool> used = {}) {
  if (used.empty()) used.assign(pred.size(), false);
  if (i == truth.size()) return 0;
  std::size_t best = optimal_matches(pred, truth, tol, i + 1, used);
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (used[j] || localisation_error(pred[j], truth[i]) > tol) continue;
    used[j] = true;
    best = std::max(best, 1 + optimal_matches(pred, truth, tol, i + 1, used));
    used[j] = false;
  }
  return best;
}

}  // namespace

TEST(LocalisationError, Basics) {
  EXPECT_EQ(localisation_error(50, 50), 0u);
  EXPECT_EQ(localisation_error(52, 50), 2u);
  EXPECT_EQ(localisation_error(50, 52), 2u);
}

TEST(AdjustedF1, HandCases) {
  const std::vector<std::size_t> truth{50};
  EXPECT_DOUBLE_EQ(adjusted_f1(std::vector<std::size_t>{52}, truth, 100).f1, 1.0);
  EXPECT_DOUBLE_EQ(adjusted_f1(std::vector<std::size_t>{70}, truth, 100).f1, 0.0);
  const auto s = adjusted_f1(std::vector<std::size_t>{52, 90}, truth, 100);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(adjusted_f1({}, {}, 10).f1, 0.0);
  EXPECT_THROW(adjusted_f1(std::vector<std::size_t>{11}, truth, 10), ParameterError);
}

TEST(AdjustedF1, NoDoubleCredit) {
  const auto s = adjusted_f1(std::vector<std::size_t>{49, 51}, std::vector<std::size_t>{50}, 100);
  EXPECT_EQ(s.matches.size(), 1u);
  EXPECT_EQ(s.matches[0], (std::pair<std::size_t, std::size_t>{49, 50}));
}

TEST(AdjustedF1, AgreesWithOptimalMatchingExceptDocumentedCases) {
  std::mt19937_64 rng(17);
  std::size_t disagreements = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::uniform_int_distribution<std::size_t> count(0, 6);
    std::uniform_int_distribution<std::size_t> when(1, 40);
    std::vector<std::size_t> pred(count(rng));
    std::vector<std::size_t> truth(count(rng));
    for (auto& p : pred) p = when(rng);
    for (auto& t : truth) t = when(rng);
    std::sort(pred.begin(), pred.end());
    pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
    std::sort(truth.begin(), truth.end());
    truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
    const std::size_t tol = trial % 4 * 2 + 1;
    const auto s = adjusted_f1(pred, truth, 40, tol);
    const auto best = optimal_matches(pred, truth, tol);
    // Greedy never beats the optimum and loses at most what a chain of
    // overlapping windows can cost.
    ASSERT_LE(s.matches.size(), best);
    if (s.matches.size() != best) {
      ++disagreements;
      EXPECT_GE(2 * s.matches.size(), best);
    }
    // Order invariance.
    std::reverse(pred.begin(), pred.end());
    EXPECT_EQ(adjusted_f1(pred, truth, 40, tol).f1, s.f1);
  }
  // Nearest-first greedy is optimal on most small instances.
  EXPECT_LT(disagreements, 200u);
}

TEST(PairMetrics, HandCases) {
  const std::vector<int> truth{1, 0, 1, 0};
  const auto perfect = pair_metrics(truth, truth);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  const auto zeros = pair_metrics(std::vector<int>{0, 0, 0, 0}, truth);
  EXPECT_DOUBLE_EQ(zeros.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(zeros.f1, 0.0);
  EXPECT_DOUBLE_EQ(pair_metrics(std::vector<int>{0, 1, 0, 1}, truth).accuracy, 0.0);
  EXPECT_THROW(pair_metrics(std::vector<int>{1}, truth), ParameterError);
}

TEST(MetricRecord, SerialisesAllFields) {
  MetricRecord r{"cusum", "merge", 0.4, 3, {{"error", 2.0}}};
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["method"], "cusum");
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["error"], 2.0);
  const std::vector<double> v{1.0, 3.0};
  EXPECT_EQ(mean_std(v), (std::pair<double, double>{2.0, std::sqrt(2.0)}));
}
