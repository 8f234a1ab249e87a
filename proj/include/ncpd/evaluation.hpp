#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ncpd {

/// |tau_hat − tau|
std::size_t localisation_error(std::size_t tau_hat, std::size_t tau);

struct DetectionScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (predicted, true), sorted by true timestamp
};

/// Change-point F1 where a prediction within ±tol of a true change-point counts.
/// Matching is one-to-one and greedy: candidate pairs are taken in order of
/// increasing distance (then earlier truth, then earlier prediction).
/// Duplicate timestamps are ignored. Empty sets give zero precision/recall.
DetectionScore adjusted_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth, std::size_t T,
                           std::size_t tol = 5);

struct PairMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;  // label 1 positive
};

PairMetrics pair_metrics(std::span<const int> predicted, std::span<const int> truth);

/// One benchmark measurement, serialised as a JSON object.
struct MetricRecord {
  std::string method;
  std::string scenario;
  double level = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, double> values;

  std::string to_json() const;
};

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace ncpd
