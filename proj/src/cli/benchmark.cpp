#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <tuple>

#include "common.hpp"
#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"
#include "ncpd/synthetic.hpp"

namespace ncpd::cli {

namespace {

struct Method {
  std::string name;                 // reported name
  std::optional<Pooling> pooling;   // set for the learned detector
  std::optional<Baseline> baseline;
};

std::vector<Method> expand_methods(const RunConfig& config) {
  std::vector<Method> out;
  const auto poolings = config.list("poolings");
  for (const auto& m : config.list("methods")) {
    if (m == "sgnn") {
      if (poolings.empty()) throw ConfigError("poolings is empty");
      for (const auto& p : poolings) {
        const auto pooling = parse_pooling(p);
        out.push_back({pooling == Pooling::SortK ? "sgnn" : "sgnn-" + to_string(pooling), pooling, std::nullopt});
      }
    } else {
      out.push_back({m, std::nullopt, parse_baseline(m)});
    }
  }
  if (out.empty()) throw ConfigError("methods is empty");
  return out;
}

bool needs_model(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), [](const Method& m) { return m.pooling.has_value(); });
}

std::vector<std::size_t> window_sizes(const RunConfig& config) {
  auto Ls = config.counts("L");
  if (Ls.empty()) throw ConfigError("L is empty");
  for (auto L : Ls)
    if (L == 0) throw ConfigError("window sizes must be >= 1");
  return Ls;
}

MethodStatistic statistic_for(const Method& m, const DynamicNetwork& net, std::size_t L, const BaselineConfig& b,
                              const SgnnModel* model) {
  if (m.pooling) return sgnn_statistic(*model, net, L);
  auto s = baseline_statistic(*m.baseline, net, L, b);
  return {std::move(s.statistic), s.orientation, std::move(s.warnings)};
}

// ---------------------------------------------------------------------------
// Synthetic protocol: one sequence plus an independent pair pool per run;
// the error of the offline ArgMin localisation is recorded.

std::vector<MetricRecord> synthetic_run(const RunConfig& config, const std::vector<Method>& methods,
                                        const std::vector<std::size_t>& Ls, double level, std::size_t level_index,
                                        std::size_t seed_index) {
  const auto seed = derive_seed(config.seed(), level_index, seed_index);
  ScenarioSpec spec;
  spec.kind = parse_scenario(config.text("scenario"));
  spec.level = level;
  spec.n = config.count("n");
  Rng rng(seed);
  const auto models = scenario_models(spec, rng);
  const auto net = generate_sequence(models, config.count("T"), std::nullopt, rng);
  const std::size_t tau = net.change_points().front();
  const auto baselines = baseline_config(config);

  std::optional<PairPool> pool;
  std::map<Pooling, SgnnModel> trained;
  if (needs_model(methods)) {
    pool = generate_pair_dataset(models, config.count("pairs"), rng, to_string(spec.kind));
    auto base = model_config(config);
    const auto graphs = prepare_graphs(pool->graphs, base.encoding);
    for (const auto& m : methods) {
      if (!m.pooling || trained.count(*m.pooling)) continue;
      base.pooling = *m.pooling;
      trained[*m.pooling] = fit_model(config, base, graphs, pool->train, pool->validation, seed).model;
    }
  }

  std::vector<MetricRecord> out;
  for (const auto& m : methods) {
    const SgnnModel* model = m.pooling ? &trained.at(*m.pooling) : nullptr;
    for (auto L : Ls) {
      const auto s = statistic_for(m, net, L, baselines, model);
      const auto tau_hat = localize_single_offline(s.statistic, Localisation::ArgMin, s.orientation);
      MetricRecord r{m.name, to_string(spec.kind), level, seed, {}};
      r.values = {{"L", static_cast<double>(L)},
                  {"tau", static_cast<double>(tau)},
                  {"tau_hat", static_cast<double>(tau_hat)},
                  {"localisation_error", static_cast<double>(localisation_error(tau_hat, tau))}};
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labelled-network protocols. A part names a network and the ranges used for
// training, validation (threshold calibration) and scoring.

struct Part {
  std::size_t network = 0;
  TimeRange train{1, 0};
  TimeRange validation{1, 0};
  TimeRange test{1, 0};
};

struct ActivityData {
  std::vector<std::string> names;
  std::vector<DynamicNetwork> networks;
};

ActivityData load_networks(const std::vector<std::string>& paths) {
  ActivityData d;
  for (const auto& p : paths) {
    d.names.push_back(std::filesystem::path(p).stem().string());
    d.networks.push_back(load_network(p));
    if (d.networks.back().change_points().empty())
      throw ParameterError("network '" + p + "' carries no change-points");
  }
  return d;
}

/// Trains one model on the train/validation ranges of `parts` (pairs never
/// straddle two networks) and scores every method on the test ranges.
std::vector<MetricRecord> evaluate_parts(const RunConfig& config, const std::vector<Method>& methods,
                                         const std::vector<std::size_t>& Ls, const ActivityData& data,
                                         const std::vector<Part>& parts, const std::string& scenario,
                                         std::uint64_t seed) {
  const auto baselines = baseline_config(config);
  const std::size_t tol = config.count("tol");
  std::map<Pooling, SgnnModel> trained;
  if (needs_model(methods)) {
    auto base = model_config(config);
    std::vector<PreparedGraph> graphs;
    std::vector<std::size_t> offset(data.networks.size(), 0);
    for (std::size_t i = 0; i < data.networks.size(); ++i) {
      offset[i] = graphs.size();
      auto g = prepare_graphs(data.networks[i].snapshots(), base.encoding);
      std::move(g.begin(), g.end(), std::back_inserter(graphs));
    }
    Rng rng(derive_seed(seed, 0x5a));
    std::optional<std::size_t> requested;
    if (config.has("n-pairs")) requested = config.count("n-pairs");
    PairDataset train_pairs;
    PairDataset val_pairs;
    auto append = [](PairDataset& to, const PairDataset& from, std::size_t off) {
      for (auto p : from.pairs) {
        p.t1 += off;
        p.t2 += off;
        to.pairs.push_back(p);
      }
    };
    for (const auto& part : parts) {
      const auto& net = data.networks[part.network];
      const auto& cps = net.change_points();
      const bool has_negatives = std::any_of(cps.begin(), cps.end(), [&](std::size_t c) {
        return c > part.train.first && c <= part.train.last;
      });
      if (part.train.length() >= 2 && has_negatives)
        append(train_pairs, balanced_pairs(part.train, net.change_points(), requested, rng), offset[part.network]);
      if (part.validation.length() >= 1)
        append(val_pairs, windowed_scheme(part.validation, net.change_points(), config.count("val-L")),
               offset[part.network]);
    }
    if (train_pairs.size() == 0) throw ParameterError("no training pairs: no training range contains a change-point");
    for (const auto& m : methods) {
      if (!m.pooling || trained.count(*m.pooling)) continue;
      base.pooling = *m.pooling;
      trained[*m.pooling] = fit_model(config, base, graphs, train_pairs, val_pairs, seed).model;
    }
  }

  std::vector<MetricRecord> out;
  for (const auto& m : methods) {
    const SgnnModel* model = m.pooling ? &trained.at(*m.pooling) : nullptr;
    for (auto L : Ls) {
      std::map<std::size_t, MethodStatistic> stats;
      auto stat = [&](std::size_t i) -> const MethodStatistic& {
        auto it = stats.find(i);
        if (it == stats.end()) it = stats.emplace(i, statistic_for(m, data.networks[i], L, baselines, model)).first;
        return it->second;
      };
      std::vector<Series> zs;
      std::vector<std::vector<std::size_t>> cps;
      Orientation orientation = Orientation::SimilarityFalls;
      for (const auto& part : parts) {
        if (part.validation.length() == 0) continue;
        const auto& s = stat(part.network);
        orientation = s.orientation;
        auto z = restrict_series(s.statistic, part.validation);
        if (z.empty()) continue;
        zs.push_back(std::move(z));
        cps.push_back(points_in(data.networks[part.network].change_points(), part.validation));
      }
      if (zs.empty()) throw ParameterError("no statistic values inside the validation ranges (L=" + std::to_string(L) + ")");
      const auto cal = calibrate_threshold(zs, cps, L, orientation, tol);
      for (const auto& part : parts) {
        if (part.test.length() == 0) continue;
        const auto& s = stat(part.network);
        const auto& net = data.networks[part.network];
        const auto z = restrict_series(s.statistic, part.test);
        const auto declared = z.empty() ? std::vector<std::size_t>{} : detect_online(z, L, cal.theta, s.orientation);
        const auto truth = points_in(net.change_points(), part.test);
        const auto score = adjusted_f1(declared, truth, net.length(), tol);
        MetricRecord r{m.name, scenario + ":" + data.names[part.network], 0.0, seed, {}};
        r.values = {{"L", static_cast<double>(L)},        {"theta", cal.theta},
                    {"f1", score.f1},                     {"precision", score.precision},
                    {"recall", score.recall},             {"declared", static_cast<double>(declared.size())},
                    {"truth", static_cast<double>(truth.size())}};
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

/// Contiguous train / validation / test split of one network.
Part split_part(std::size_t network, std::size_t T, const RunConfig& config) {
  const double tf = config.real("train-frac");
  const double vf = config.real("val-frac");
  const auto s = split_sequence(T, tf, vf, 1.0 - tf - vf);
  return {network, s.train, s.validation, s.test};
}

/// Train / validation only: the test share of the split is folded into training.
Part fit_part(std::size_t network, std::size_t T, const RunConfig& config) {
  const double tf = config.real("train-frac");
  const double vf = config.real("val-frac");
  if (tf <= 0.0 || vf <= 0.0) throw ConfigError("train-frac and val-frac must be positive");
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(T) * tf / (tf + vf)));
  if (n_train < 2 || n_train >= T) throw ParameterError("network too short for a train / validation split");
  return {network, {1, n_train}, {n_train + 1, T}, {1, 0}};
}

// ---------------------------------------------------------------------------

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void write_outputs(const RunConfig& config, const std::vector<MetricRecord>& records, json& summary_line) {
  ensure_output_dir(config);
  const auto name = config.text("name");
  const auto runs_jsonl = config.output_path(name + "_runs.jsonl");
  const auto runs_csv = config.output_path(name + "_runs.csv");
  const auto summary_csv = config.output_path(name + "_summary.csv");
  const auto summary_json = config.output_path(name + "_summary.json");
  {
    std::ofstream f(runs_jsonl);
    if (!f) throw IoError("cannot open '" + runs_jsonl + "' for writing");
    f << json{{"meta", {{"config_hash", config.hash()}, {"seed", config.seed()}}}}.dump() << '\n';
    for (const auto& r : records) f << r.to_json() << '\n';
  }
  {
    std::ofstream f(runs_csv);
    if (!f) throw IoError("cannot open '" + runs_csv + "' for writing");
    f << "# " << config.provenance() << "\nmethod,scenario,level,seed,L,metric,value\n";
    for (const auto& r : records)
      for (const auto& [k, v] : r.values)
        if (k != "L")
          f << r.method << ',' << r.scenario << ',' << fmt(r.level) << ',' << r.seed << ','
            << static_cast<std::size_t>(r.values.at("L")) << ',' << k << ',' << fmt(v) << '\n';
  }
  // Grouped by (method, scenario family, level, L); activity records pool their networks.
  using Key = std::tuple<std::string, std::string, double, std::size_t, std::string>;
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;
  for (const auto& r : records) {
    const auto family = r.scenario.substr(0, r.scenario.find(':'));
    for (const auto& [k, v] : r.values) {
      if (k == "L" || k == "tau" || k == "tau_hat" || k == "theta" || k == "declared" || k == "truth") continue;
      Key key{r.method, family, r.level, static_cast<std::size_t>(r.values.at("L")), k};
      auto [it, fresh] = groups.try_emplace(key);
      if (fresh) order.push_back(key);
      it->second.push_back(v);
    }
  }
  json rows = json::array();
  std::ofstream f(summary_csv);
  if (!f) throw IoError("cannot open '" + summary_csv + "' for writing");
  f << "# " << config.provenance() << "\nmethod,scenario,level,L,metric,mean,std,count\n";
  for (const auto& key : order) {
    const auto& v = groups.at(key);
    const auto [mean, sd] = mean_std(v);
    const auto& [method, scenario, level, L, metric] = key;
    f << method << ',' << scenario << ',' << fmt(level) << ',' << L << ',' << metric << ',' << fmt(mean) << ','
      << fmt(sd) << ',' << v.size() << '\n';
    rows.push_back({{"method", method},
                    {"scenario", scenario},
                    {"level", level},
                    {"L", L},
                    {"metric", metric},
                    {"mean", mean},
                    {"std", sd},
                    {"count", v.size()}});
  }
  write_json_file(summary_json,
                  {{"config_hash", config.hash()}, {"seed", config.seed()}, {"config", config.values()}, {"rows", rows}});
  summary_line["runs"] = runs_jsonl;
  summary_line["summary"] = summary_json;
  summary_line["rows"] = rows;
}

}  // namespace

void cmd_benchmark(const RunConfig& config, std::ostream& out) {
  const auto protocol = config.text("protocol");
  const auto methods = expand_methods(config);
  const auto Ls = window_sizes(config);
  const std::size_t workers = config.count("workers");
  const std::size_t seeds = config.count("seeds");
  if (seeds == 0) throw ConfigError("seeds must be >= 1");
  model_config(config);
  baseline_config(config);

  std::vector<MetricRecord> records;
  auto collect = [&](std::vector<std::vector<MetricRecord>> chunks) {
    for (auto& c : chunks) std::move(c.begin(), c.end(), std::back_inserter(records));
  };

  if (protocol == "synthetic") {
    const auto levels = config.reals("levels");
    if (levels.empty()) throw ConfigError("levels is empty");
    const std::size_t runs = levels.size() * seeds;
    collect(parallel_map<std::vector<MetricRecord>>(runs, workers, [&](std::size_t i) {
      return synthetic_run(config, methods, Ls, levels[i / seeds], i / seeds, i % seeds);
    }));
  } else if (protocol == "individual" || protocol == "cross-individual" || protocol == "loso") {
    const auto paths = config.list("networks");
    if (paths.empty()) throw ConfigError("protocol " + protocol + " needs --networks");
    const auto data = load_networks(paths);
    const std::size_t N = data.networks.size();
    if (protocol == "individual") {
      collect(parallel_map<std::vector<MetricRecord>>(N * seeds, workers, [&](std::size_t i) {
        const std::size_t net = i / seeds;
        std::vector<Part> parts{split_part(net, data.networks[net].length(), config)};
        return evaluate_parts(config, methods, Ls, data, parts, protocol, derive_seed(config.seed(), net, i % seeds));
      }));
    } else if (protocol == "cross-individual") {
      const auto train_paths = config.list("train-networks");
      if (!train_paths.empty()) {
        // Fixed training networks; the listed networks are scored whole.
        auto all = load_networks(train_paths);
        const std::size_t M = all.networks.size();
        for (std::size_t i = 0; i < N; ++i) {
          all.names.push_back(data.names[i]);
          all.networks.push_back(data.networks[i]);
        }
        collect(parallel_map<std::vector<MetricRecord>>(seeds, workers, [&](std::size_t r) {
          std::vector<Part> parts;
          for (std::size_t i = 0; i < M; ++i) parts.push_back(fit_part(i, all.networks[i].length(), config));
          for (std::size_t i = M; i < all.networks.size(); ++i)
            parts.push_back({i, {1, 0}, {1, 0}, {1, all.networks[i].length()}});
          return evaluate_parts(config, methods, Ls, all, parts, protocol, derive_seed(config.seed(), r));
        }));
      } else {
        collect(parallel_map<std::vector<MetricRecord>>(seeds, workers, [&](std::size_t r) {
          std::vector<Part> parts;
          for (std::size_t i = 0; i < N; ++i) parts.push_back(split_part(i, data.networks[i].length(), config));
          return evaluate_parts(config, methods, Ls, data, parts, protocol, derive_seed(config.seed(), r));
        }));
      }
    } else {
      if (N < 2) throw ConfigError("loso needs at least two networks");
      collect(parallel_map<std::vector<MetricRecord>>(N, workers, [&](std::size_t held) {
        std::vector<Part> parts;
        for (std::size_t i = 0; i < N; ++i) {
          if (i == held) {
            parts.push_back({i, {1, 0}, {1, 0}, {1, data.networks[i].length()}});
          } else {
            parts.push_back(fit_part(i, data.networks[i].length(), config));
          }
        }
        return evaluate_parts(config, methods, Ls, data, parts, protocol, derive_seed(config.seed(), held));
      }));
    }
  } else {
    throw ConfigError("unknown protocol '" + protocol + "'");
  }

  json summary{{"command", "benchmark"}, {"config_hash", config.hash()}, {"protocol", protocol},
               {"records", records.size()}};
  write_outputs(config, records, summary);
  out << summary.dump() << '\n';
}

}  // namespace ncpd::cli
