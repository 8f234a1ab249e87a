#include "ncpd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncpd/error.hpp"

namespace ncpd {

SbmSpec SbmSpec::planted(std::vector<std::size_t> memberships, double p, double q) {
  const std::size_t k = memberships.empty() ? 1 : *std::max_element(memberships.begin(), memberships.end()) + 1;
  Matrix c(k, k, q);
  for (std::size_t i = 0; i < k; ++i) c(i, i) = p;
  return with_connectivity(std::move(memberships), std::move(c));
}

SbmSpec SbmSpec::with_connectivity(std::vector<std::size_t> memberships, Matrix connectivity) {
  if (!connectivity.is_square()) throw ParameterError("connectivity matrix must be square");
  for (double v : connectivity.data())
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("edge probabilities must lie in [0, 1]");
  for (auto m : memberships)
    if (m >= connectivity.rows()) throw ParameterError("membership index exceeds community count");
  SbmSpec s;
  s.n = memberships.size();
  s.memberships = std::move(memberships);
  s.connectivity = std::move(connectivity);
  return s;
}

Graph sample_sbm(const SbmSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix a(spec.n, spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = i + 1; j < spec.n; ++j) {
      if (unif(rng) < spec.probability(i, j)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return Graph(std::move(a));
}

std::vector<std::size_t> equal_blocks(std::size_t n, std::size_t blocks) {
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = i * blocks / n;
  return m;
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Merge: return "merge";
    case Scenario::Birth1: return "birth1";
    case Scenario::Birth2: return "birth2";
    case Scenario::Swaps: return "swaps";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  if (text == "merge") return Scenario::Merge;
  if (text == "birth1") return Scenario::Birth1;
  if (text == "birth2") return Scenario::Birth2;
  if (text == "swaps") return Scenario::Swaps;
  throw ConfigError("unknown scenario '" + text + "'");
}

namespace {

// Planted community of size s on the last s nodes: C = [[q, q], [q, p]].
SbmSpec birth_model(std::size_t n, std::size_t s, double p, double q) {
  if (s == 0) return SbmSpec::planted(std::vector<std::size_t>(n, 0), q, q);
  std::vector<std::size_t> m(n, 0);
  for (std::size_t i = n - s; i < n; ++i) m[i] = 1;
  return SbmSpec::with_connectivity(std::move(m), Matrix{{q, q}, {q, p}});
}

std::vector<std::size_t> swap_memberships(std::vector<std::size_t> m, std::size_t pairs, Rng& rng) {
  const std::size_t n = m.size();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::size_t> free(n);
    std::iota(free.begin(), free.end(), 0);
    std::vector<std::size_t> out = m;
    bool ok = true;
    for (std::size_t k = 0; k < pairs && ok; ++k) {
      // Rejection sampling of a cross-community pair among unused nodes.
      bool found = false;
      for (int tries = 0; tries < 10000 && !found; ++tries) {
        std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        if (a == b || m[free[a]] == m[free[b]]) continue;
        std::swap(out[free[a]], out[free[b]]);
        const auto hi = std::max(a, b);
        const auto lo = std::min(a, b);
        free.erase(free.begin() + static_cast<std::ptrdiff_t>(hi));
        free.erase(free.begin() + static_cast<std::ptrdiff_t>(lo));
        found = true;
      }
      ok = found;
    }
    if (ok) return out;
  }
  throw ParameterError("swaps: could not draw the requested number of disjoint cross-community pairs");
}

}  // namespace

ScenarioModels scenario_models(const ScenarioSpec& spec, Rng& rng) {
  using namespace scenario_defaults;
  const std::size_t n = spec.n;
  if (n < 4) throw ParameterError("scenario needs at least 4 nodes");
  switch (spec.kind) {
    case Scenario::Merge: {
      if (!(spec.level >= 0.0 && spec.level <= 1.0)) throw ParameterError("merge: p must lie in [0, 1]");
      return {SbmSpec::planted(equal_blocks(n, 4), spec.level, kMergeInter),
              SbmSpec::planted(equal_blocks(n, 2), spec.level, kMergeInter)};
    }
    case Scenario::Birth1: {
      if (spec.level < 0.0 || spec.level != std::floor(spec.level))
        throw ParameterError("birth1: s must be a nonnegative integer");
      const auto s = static_cast<std::size_t>(spec.level);
      if (2 * s > n) throw ParameterError("birth1: s must satisfy s <= n/2");
      return {birth_model(n, 0, kBirth1Dense, kBirthBackground), birth_model(n, s, kBirth1Dense, kBirthBackground)};
    }
    case Scenario::Birth2: {
      if (!(spec.level >= 0.0 && spec.level <= 1.0)) throw ParameterError("birth2: p must lie in [0, 1]");
      return {birth_model(n, 0, spec.level, kBirthBackground), birth_model(n, n / 4, spec.level, kBirthBackground)};
    }
    case Scenario::Swaps: {
      if (!(spec.level >= 0.0 && spec.level <= 1.0)) throw ParameterError("swaps: h must lie in [0, 1]");
      const auto pre = equal_blocks(n, 4);
      const auto pairs = static_cast<std::size_t>(std::floor(spec.level * static_cast<double>(n) / 2.0));
      auto post = swap_memberships(pre, pairs, rng);
      return {SbmSpec::planted(pre, kSwapsIntra, kSwapsInter), SbmSpec::planted(std::move(post), kSwapsIntra, kSwapsInter)};
    }
  }
  throw ParameterError("unknown scenario");
}

DynamicNetwork generate_sequence(const ScenarioSpec& spec, std::size_t T, std::optional<std::size_t> tau, Rng& rng) {
  if (T < 2) throw ParameterError("generate_sequence: T must be >= 2");
  const auto models = scenario_models(spec, rng);
  return generate_sequence(models, T, tau, rng);
}

DynamicNetwork generate_sequence(const ScenarioModels& models, std::size_t T, std::optional<std::size_t> tau,
                                 Rng& rng) {
  if (T < 2) throw ParameterError("generate_sequence: T must be >= 2");
  std::size_t cp = 0;
  if (tau) {
    cp = *tau;
  } else {
    const auto lo = static_cast<std::size_t>(std::lround(0.25 * static_cast<double>(T)));
    const auto hi = static_cast<std::size_t>(std::lround(0.75 * static_cast<double>(T)));
    std::uniform_int_distribution<std::size_t> pick(std::max<std::size_t>(lo, 2), std::max<std::size_t>(hi, 2));
    cp = pick(rng);
  }
  if (cp <= 1 || cp > T) throw ParameterError("generate_sequence: tau must satisfy 1 < tau <= T");
  std::vector<Graph> snaps;
  snaps.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) snaps.push_back(sample_sbm(t < cp ? models.pre : models.post, rng));
  return DynamicNetwork(std::move(snaps), {cp});
}

std::vector<PairExample> PairPool::all_pairs() const {
  std::vector<PairExample> out = train.pairs;
  out.insert(out.end(), validation.pairs.begin(), validation.pairs.end());
  out.insert(out.end(), test.pairs.begin(), test.pairs.end());
  return out;
}

PairPool generate_pair_dataset(const ScenarioSpec& spec, std::size_t n_pairs, Rng& rng) {
  if (n_pairs % 2 != 0) throw ParameterError("generate_pair_dataset: n_pairs must be even");
  const auto models = scenario_models(spec, rng);
  return generate_pair_dataset(models, n_pairs, rng, to_string(spec.kind));
}

PairPool generate_pair_dataset(const ScenarioModels& models, std::size_t n_pairs, Rng& rng, const std::string& source) {
  if (n_pairs % 2 != 0) throw ParameterError("generate_pair_dataset: n_pairs must be even");
  std::vector<int> labels(n_pairs, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pairs / 2), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  PairPool pool;
  pool.graphs.reserve(2 * n_pairs);
  std::bernoulli_distribution coin(0.5);
  std::vector<PairExample> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    int first_model = 0;
    int second_model = 0;
    if (labels[i] == 1) {
      first_model = second_model = coin(rng) ? 1 : 0;
    } else {
      first_model = coin(rng) ? 1 : 0;
      second_model = 1 - first_model;
    }
    for (int model : {first_model, second_model}) {
      pool.graphs.push_back(sample_sbm(model == 0 ? models.pre : models.post, rng));
      pool.model_of.push_back(model);
    }
    pairs.push_back({2 * i + 1, 2 * i + 2, labels[i]});
  }
  const auto n_train = n_pairs * 6 / 10;
  const auto n_val = n_pairs * 2 / 10;
  auto take = [&](std::size_t from, std::size_t to, const char* split) {
    PairDataset d;
    d.split = split;
    d.source = source;
    d.pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(from), pairs.begin() + static_cast<std::ptrdiff_t>(to));
    return d;
  };
  pool.train = take(0, n_train, "train");
  pool.validation = take(n_train, n_train + n_val, "validation");
  pool.test = take(n_train + n_val, n_pairs, "test");
  return pool;
}

}  // namespace ncpd
