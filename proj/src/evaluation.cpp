#include "ncpd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ncpd/error.hpp"

namespace ncpd {

std::size_t localisation_error(std::size_t tau_hat, std::size_t tau) {
  return tau_hat > tau ? tau_hat - tau : tau - tau_hat;
}

DetectionScore adjusted_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth, std::size_t T,
                           std::size_t tol) {
  for (auto t : predicted)
    if (t == 0 || t > T) throw ParameterError("adjusted_f1: predicted timestamp " + std::to_string(t) + " outside [1, T]");
  for (auto t : truth)
    if (t == 0 || t > T) throw ParameterError("adjusted_f1: true timestamp " + std::to_string(t) + " outside [1, T]");
  const std::set<std::size_t> pred(predicted.begin(), predicted.end());
  const std::set<std::size_t> real(truth.begin(), truth.end());

  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> candidates;  // distance, truth, prediction
  for (auto t : real)
    for (auto p : pred)
      if (localisation_error(p, t) <= tol) candidates.emplace_back(localisation_error(p, t), t, p);
  std::sort(candidates.begin(), candidates.end());

  DetectionScore s;
  std::set<std::size_t> used_pred;
  std::set<std::size_t> used_true;
  for (const auto& [d, t, p] : candidates) {
    if (used_pred.count(p) || used_true.count(t)) continue;
    used_pred.insert(p);
    used_true.insert(t);
    s.matches.emplace_back(p, t);
  }
  std::sort(s.matches.begin(), s.matches.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  const double m = static_cast<double>(s.matches.size());
  s.precision = pred.empty() ? 0.0 : m / static_cast<double>(pred.size());
  s.recall = real.empty() ? 0.0 : m / static_cast<double>(real.size());
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

PairMetrics pair_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ParameterError("pair_metrics: length mismatch");
  if (predicted.empty()) throw ParameterError("pair_metrics: no labels");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) ++correct;
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] != 1) ++fp;
    if (predicted[i] != 1 && truth[i] == 1) ++fn;
  }
  PairMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = tp > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  return m;
}

std::string MetricRecord::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["scenario"] = scenario;
  j["level"] = level;
  j["seed"] = seed;
  for (const auto& [k, v] : values) j[k] = v;
  return j.dump();
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace ncpd
