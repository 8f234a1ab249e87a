#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncpd/baselines.hpp"
#include "ncpd/cli.hpp"
#include "ncpd/detection.hpp"
#include "ncpd/sampling.hpp"
#include "ncpd/sgnn.hpp"

namespace ncpd::cli {

using nlohmann::json;

/// splitmix64 of the base seed mixed with two stream indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

FileMeta file_meta(const RunConfig& config, std::uint64_t seed);
void ensure_output_dir(const RunConfig& config);

/// A comma list ("12,40") or a JSON file holding an array or {"change_points": [...]}.
std::vector<std::size_t> parse_change_points(const std::string& value);

SgnnConfig model_config(const RunConfig& config);
BaselineConfig baseline_config(const RunConfig& config);

/// Grid search when config "grid" names a grid, plain training otherwise.
TrainResult fit_model(const RunConfig& config, const SgnnConfig& base, std::span<const PreparedGraph> graphs,
                      const PairDataset& train_pairs, const PairDataset& validation_pairs, std::uint64_t seed,
                      std::vector<std::pair<SgnnConfig, double>>* evaluated = nullptr);

/// Random-scheme pairs, the request capped to what the range can balance.
PairDataset balanced_pairs(TimeRange range, std::span<const std::size_t> cps, std::optional<std::size_t> requested,
                           Rng& rng);

struct MethodStatistic {
  Series statistic;
  Orientation orientation = Orientation::SimilarityFalls;
  std::vector<std::string> warnings;
};

/// Averaged (or MMD) learned-similarity statistic; embeddings computed once.
MethodStatistic sgnn_statistic(const SgnnModel& model, const DynamicNetwork& net, std::size_t L, bool mmd = false);
MethodStatistic method_statistic(const std::string& method, const DynamicNetwork& net, std::size_t L,
                                 const BaselineConfig& baselines, const SgnnModel* model, bool mmd = false);

/// Values of z whose timestamps fall in `range`.
Series restrict_series(const Series& z, TimeRange range);
std::vector<std::size_t> points_in(std::span<const std::size_t> cps, TimeRange range);

void write_json_file(const std::string& path, const json& j);

/// Runs f(0..n-1) on up to `workers` threads; results kept in index order and
/// the first exception rethrown.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, std::size_t workers, F f) {
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace ncpd::cli
