#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncpd/graph.hpp"
#include "ncpd/linalg.hpp"
#include "ncpd/sampling.hpp"

namespace ncpd {

using Rng = std::mt19937_64;

/// Stochastic block model: community memberships plus a K×K connectivity matrix.
struct SbmSpec {
  std::size_t n = 0;
  std::vector<std::size_t> memberships;
  Matrix connectivity;

  /// Connectivity (p - q)·I_K + q·11ᵀ.
  static SbmSpec planted(std::vector<std::size_t> memberships, double p, double q);
  static SbmSpec with_connectivity(std::vector<std::size_t> memberships, Matrix connectivity);

  std::size_t communities() const noexcept { return connectivity.rows(); }
  double probability(std::size_t i, std::size_t j) const {
    return connectivity(memberships[i], memberships[j]);
  }
};

/// Binary symmetric graph without self-loops; each pair i<j is an independent Bernoulli.
Graph sample_sbm(const SbmSpec& spec, Rng& rng);

/// Membership vector of `blocks` contiguous, (nearly) equal-size communities.
std::vector<std::size_t> equal_blocks(std::size_t n, std::size_t blocks);

enum class Scenario { Merge, Birth1, Birth2, Swaps };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);

/// One synthetic change-point setting. `level` is p for Merge and Birth2, the
/// planted community size s for Birth1, and the swap proportion h for Swaps.
struct ScenarioSpec {
  Scenario kind = Scenario::Merge;
  double level = 0.5;
  std::size_t n = 400;
};

/// Generating models before and after the change-point.
struct ScenarioModels {
  SbmSpec pre;
  SbmSpec post;
};

namespace scenario_defaults {
inline constexpr double kMergeInter = 0.02;
inline constexpr double kBirthBackground = 0.03;
inline constexpr double kBirth1Dense = 0.1;
inline constexpr double kSwapsIntra = 0.1;
inline constexpr double kSwapsInter = 0.05;
}  // namespace scenario_defaults

/// Builds the pre/post SBMs. `rng` only drives the Swaps pair selection.
ScenarioModels scenario_models(const ScenarioSpec& spec, Rng& rng);

/// Sequence of T snapshots with a single change at tau (1-based). When tau is
/// not given it is drawn uniformly from [round(T/4), round(3T/4)].
DynamicNetwork generate_sequence(const ScenarioSpec& spec, std::size_t T, std::optional<std::size_t> tau,
                                 Rng& rng);
/// Same, with models drawn beforehand (shared with a pair pool, for instance).
DynamicNetwork generate_sequence(const ScenarioModels& models, std::size_t T, std::optional<std::size_t> tau,
                                 Rng& rng);

/// Independent labelled graph pairs for pair-classification experiments.
///
/// Graph 2i-1 and 2i (1-based) of `pool` form pair i. Pairs are shuffled and
/// split 60/20/20 into train/validation/test.
struct PairPool {
  std::vector<Graph> graphs;
  /// Generating model of each graph (0 = pre, 1 = post).
  std::vector<int> model_of;
  PairDataset train;
  PairDataset validation;
  PairDataset test;

  std::vector<PairExample> all_pairs() const;
  DynamicNetwork as_network() const { return DynamicNetwork(graphs); }
};

PairPool generate_pair_dataset(const ScenarioSpec& spec, std::size_t n_pairs, Rng& rng);
PairPool generate_pair_dataset(const ScenarioModels& models, std::size_t n_pairs, Rng& rng,
                               const std::string& source = {});

}  // namespace ncpd
