#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "ncpd/error.hpp"
#include "ncpd/evaluation.hpp"
#include "ncpd/ingest.hpp"
#include "ncpd/selfsup.hpp"
#include "ncpd/synthetic.hpp"

namespace ncpd::cli {

// ---------------------------------------------------------------------------
// Shared helpers

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

FileMeta file_meta(const RunConfig& config, std::uint64_t seed) { return {seed, config.hash()}; }

void ensure_output_dir(const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir(), ec);
  if (ec) throw IoError("cannot create output directory '" + config.output_dir() + "': " + ec.message());
}

std::vector<std::size_t> parse_change_points(const std::string& value) {
  std::vector<std::size_t> out;
  if (value.empty()) return out;
  if (std::filesystem::is_regular_file(value)) {
    std::ifstream in(value);
    if (!in) throw IoError("cannot open '" + value + "'");
    try {
      const auto j = json::parse(in);
      const auto& arr = j.is_object() ? j.at("change_points") : j;
      out = arr.get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw ParseError("bad change-point file '" + value + "': " + e.what(), 1);
    }
  } else {
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(item, &used);
        if (used != item.size() || v == 0) throw std::invalid_argument(item);
        out.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw ConfigError("change-points: '" + value + "' is neither a file nor a list of timestamps");
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SgnnConfig model_config(const RunConfig& config) {
  SgnnConfig c;
  c.epochs = config.count("epochs");
  c.learning_rate = config.real("lr");
  c.dropout = config.real("dropout");
  c.sortk = config.count("sortk");
  c.hidden_units = config.count("hidden");
  c.gcn_layers = config.count("layers");
  c.fc_units = {config.count("fc1"), config.count("fc2")};
  c.encoding = EncodingKind::parse(config.text("encoding"));
  c.pooling = parse_pooling(config.text("pooling"));
  c.weight_decay = config.real("weight-decay");
  c.batch_size = config.count("batch-size");
  c.validate();
  return c;
}

BaselineConfig baseline_config(const RunConfig& config) {
  BaselineConfig b;
  b.k_spectral = config.count("k-spectral");
  if (config.has("window-half")) b.window_half = config.count("window-half");
  if (config.has("deltacon-epsilon")) b.deltacon_epsilon = config.real("deltacon-epsilon");
  b.wl_iterations = config.count("wl-iterations");
  b.validate();
  return b;
}

TrainResult fit_model(const RunConfig& config, const SgnnConfig& base, std::span<const PreparedGraph> graphs,
                      const PairDataset& train_pairs, const PairDataset& validation_pairs, std::uint64_t seed,
                      std::vector<std::pair<SgnnConfig, double>>* evaluated) {
  const auto grid = config.text("grid");
  if (grid == "none") return train(base, graphs, train_pairs, validation_pairs, seed);
  SgnnGrid g;
  if (grid == "default-synthetic") {
    g = SgnnGrid::default_synthetic();
  } else if (grid == "default-financial") {
    g = SgnnGrid::default_financial();
  } else {
    throw ConfigError("unknown grid '" + grid + "'");
  }
  const auto candidates = g.expand(base);
  auto result = grid_search(candidates, graphs, train_pairs, validation_pairs, seed);
  if (evaluated) *evaluated = result.evaluated;
  return std::move(result.best);
}

PairDataset balanced_pairs(TimeRange range, std::span<const std::size_t> cps, std::optional<std::size_t> requested,
                           Rng& rng) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t a = range.first; a <= range.last; ++a)
    for (std::size_t b = a + 1; b <= range.last; ++b) (same_segment_label(a, b, cps) ? pos : neg) += 1;
  if (neg == 0)
    throw ParameterError("no change-point inside the training range [" + std::to_string(range.first) + ", " +
                         std::to_string(range.last) + "]: cannot sample label-0 pairs");
  const std::size_t cap = 2 * std::min(pos, neg);
  std::size_t want = requested.value_or(10 * range.length());
  want = std::min(want, cap);
  want -= want % 2;
  return random_scheme(range, cps, want, rng);
}

MethodStatistic sgnn_statistic(const SgnnModel& model, const DynamicNetwork& net, std::size_t L, bool mmd) {
  const auto prepared = prepare_graphs(net.snapshots(), model.config.encoding);
  std::vector<Matrix> emb;
  emb.reserve(prepared.size());
  for (const auto& g : prepared) emb.push_back(model.embed(g));
  const PairScore score = [&](std::size_t a, std::size_t b) { return model.score_embeddings(emb[a - 1], emb[b - 1]); };
  MethodStatistic out;
  if (mmd) {
    out.statistic = mmd_statistic(score, net.length(), L);
    out.orientation = Orientation::DistanceRises;
  } else {
    out.statistic = similarity_statistic(score, net.length(), L);
  }
  return out;
}

MethodStatistic method_statistic(const std::string& method, const DynamicNetwork& net, std::size_t L,
                                 const BaselineConfig& baselines, const SgnnModel* model, bool mmd) {
  if (L == 0 || L >= net.length())
    throw ParameterError("window L=" + std::to_string(L) + " must satisfy 1 <= L < T=" + std::to_string(net.length()));
  if (method == "sgnn" || method.rfind("sgnn:", 0) == 0) {
    if (!model) throw ConfigError("method sgnn needs a trained model");
    return sgnn_statistic(*model, net, L, mmd);
  }
  auto b = baseline_statistic(parse_baseline(method), net, L, baselines);
  return {std::move(b.statistic), b.orientation, std::move(b.warnings)};
}

Series restrict_series(const Series& z, TimeRange range) {
  Series out;
  out.first = std::max(z.first, range.first);
  for (std::size_t t = out.first; t <= std::min(z.last(), range.last); ++t) out.values.push_back(z.at(t));
  return out;
}

std::vector<std::size_t> points_in(std::span<const std::size_t> cps, TimeRange range) {
  std::vector<std::size_t> out;
  for (auto c : cps)
    if (range.contains(c)) out.push_back(c);
  return out;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

namespace {

std::string path_stem(const std::string& p) { return std::filesystem::path(p).stem().string(); }

// ---------------------------------------------------------------------------

double scenario_level(const RunConfig& config) {
  std::optional<double> level;
  for (const char* key : {"level", "p", "s", "h"}) {
    if (!config.has(key)) continue;
    const double v = config.real(key);
    if (level && *level != v) throw ConfigError("conflicting difficulty levels (level / p / s / h)");
    level = v;
  }
  if (!level) throw ConfigError("generate needs a difficulty level: --level (or --p, --s, --h)");
  return *level;
}

}  // namespace

void cmd_generate(const RunConfig& config, std::ostream& out) {
  ScenarioSpec spec;
  spec.kind = parse_scenario(config.text("scenario"));
  spec.level = scenario_level(config);
  spec.n = config.count("n");
  const std::size_t T = config.count("T");
  std::optional<std::size_t> tau;
  if (config.has("tau")) tau = config.count("tau");
  const std::size_t seeds = config.count("seeds");
  const std::size_t pairs = config.count("pairs");
  if (seeds == 0) throw ConfigError("seeds must be >= 1");
  ensure_output_dir(config);

  json files = json::array();
  const std::string name = config.text("name");
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto seed = derive_seed(config.seed(), i);
    Rng rng(seed);
    const auto models = scenario_models(spec, rng);
    const auto net = generate_sequence(models, T, tau, rng);
    const auto stem = name + "_" + std::to_string(i);
    const auto path = config.output_path(stem + ".jsonl");
    save_network(path, net, file_meta(config, seed));
    json entry{{"network", path}, {"seed", seed}, {"change_points", net.change_points()}};
    if (pairs > 0) {
      const auto pool = generate_pair_dataset(models, pairs, rng, to_string(spec.kind));
      const auto comment = "config_hash=" + config.hash() + " seed=" + std::to_string(seed);
      const auto pool_path = config.output_path(stem + "_pool.jsonl");
      save_network(pool_path, pool.as_network(), file_meta(config, seed));
      save_pairs_csv(config.output_path(stem + "_train.csv"), pool.train, comment);
      save_pairs_csv(config.output_path(stem + "_val.csv"), pool.validation, comment);
      save_pairs_csv(config.output_path(stem + "_test.csv"), pool.test, comment);
      entry["pool"] = pool_path;
    }
    files.push_back(entry);
  }
  out << json{{"command", "generate"}, {"config_hash", config.hash()}, {"files", files}}.dump() << '\n';
}

void cmd_ingest(const RunConfig& config, std::ostream& out) {
  if (!config.has("input")) throw ConfigError("ingest needs --input");
  const auto panel = load_panel_csv(config.text("input"));
  const auto corr = windowed_correlations(panel, config.count("window"));
  const auto method = config.text("method");
  std::vector<Graph> graphs;
  if (method == "quantile") {
    graphs = quantile_truncate(corr, config.real("q-low"), config.real("q-high"));
  } else if (method == "threshold") {
    graphs = threshold_binarize(corr, config.real("eta"));
  } else {
    throw ConfigError("unknown ingest method '" + method + "'");
  }
  json warnings = json::array();
  if (config.has("attributes")) {
    const auto raw = load_long_attributes_csv(config.text("attributes"), graphs.size(), panel.series());
    const auto std_attrs = standardize_attributes(raw);
    for (auto c : std_attrs.constant_columns)
      warnings.push_back("attribute column " + std::to_string(c) + " is constant: centred only");
    for (std::size_t t = 0; t < graphs.size(); ++t) graphs[t] = Graph(graphs[t].adjacency(), std_attrs.attributes[t]);
  }
  const auto cps = parse_change_points(config.text("change-points"));
  ensure_output_dir(config);
  const auto name = config.text("name");
  const auto path = config.output_path(name + ".jsonl");
  save_network(path, DynamicNetwork(std::move(graphs), cps), file_meta(config, config.seed()));
  json summary{{"command", "ingest"},  {"config_hash", config.hash()}, {"network", path},
               {"snapshots", corr.size()}, {"nodes", panel.series()},    {"warnings", warnings}};
  if (config.flag("save-correlations")) {
    const auto corr_path = config.output_path(name + "_corr.jsonl");
    save_matrices_jsonl(corr_path, corr);
    summary["correlations"] = corr_path;
  }
  out << summary.dump() << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  if (!config.has("network")) throw ConfigError("train needs --network");
  const auto net = load_network(config.text("network"));
  auto cps = config.has("change-points") ? parse_change_points(config.text("change-points")) : net.change_points();
  const auto base = model_config(config);
  const auto graphs = prepare_graphs(net.snapshots(), base.encoding);

  PairDataset train_pairs;
  PairDataset val_pairs;
  if (config.has("pairs") || config.has("val")) {
    if (!config.has("pairs") || !config.has("val")) throw ConfigError("--pairs and --val must be given together");
    train_pairs = load_pairs_csv(config.text("pairs"));
    val_pairs = load_pairs_csv(config.text("val"));
  } else {
    const double tf = config.real("train-frac");
    const double vf = config.real("val-frac");
    const auto split = split_sequence(net.length(), tf, vf, 1.0 - tf - vf);
    Rng rng(derive_seed(config.seed(), 1));
    std::optional<std::size_t> requested;
    if (config.has("n-pairs")) requested = config.count("n-pairs");
    train_pairs = balanced_pairs(split.train, cps, requested, rng);
    val_pairs = windowed_scheme(split.validation, cps, config.count("L"));
  }
  for (const auto* d : {&train_pairs, &val_pairs})
    for (const auto& p : d->pairs)
      if (std::max(p.t1, p.t2) > net.length())
        throw ParameterError("pair (" + std::to_string(p.t1) + ", " + std::to_string(p.t2) +
                             ") refers past the end of the network (T=" + std::to_string(net.length()) + ")");

  std::vector<std::pair<SgnnConfig, double>> evaluated;
  const auto result = fit_model(config, base, graphs, train_pairs, val_pairs, config.seed(), &evaluated);

  ensure_output_dir(config);
  const auto name = config.text("name");
  const auto ckpt = config.output_path(name + ".ckpt.json");
  save_checkpoint(ckpt, result.model, &result.optimizer, config.hash());
  {
    std::ofstream h(config.output_path(name + "_history.csv"));
    if (!h) throw IoError("cannot write training history");
    h << "# " << config.provenance() << '\n';
    h << "epoch,train_loss,validation_loss,validation_accuracy,validation_f1\n" << std::setprecision(10);
    for (const auto& r : result.history)
      h << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.validation_accuracy << ','
        << r.validation_f1 << '\n';
  }
  if (!evaluated.empty()) {
    std::ofstream g(config.output_path(name + "_grid.csv"));
    if (!g) throw IoError("cannot write grid results");
    g << "# " << config.provenance() << '\n';
    g << "lr,dropout,sortk,hidden,weight_decay,validation_f1\n";
    for (const auto& [c, f1] : evaluated)
      g << c.learning_rate << ',' << c.dropout << ',' << c.sortk << ',' << c.hidden_units << ',' << c.weight_decay
        << ',' << f1 << '\n';
  }
  out << json{{"command", "train"},
              {"config_hash", config.hash()},
              {"checkpoint", ckpt},
              {"train_pairs", train_pairs.size()},
              {"validation_pairs", val_pairs.size()},
              {"best_epoch", result.best_epoch},
              {"validation_f1", result.best_f1},
              {"model", result.model.config.describe()}}
             .dump()
      << '\n';
}

void cmd_detect(const RunConfig& config, std::ostream& out) {
  if (!config.has("network")) throw ConfigError("detect needs --network");
  const auto net = load_network(config.text("network"));
  const std::size_t L = config.count("L");
  const auto method = config.text("method");
  const auto statistic_kind = config.text("statistic");
  if (statistic_kind != "average" && statistic_kind != "mmd") throw ConfigError("statistic must be average or mmd");
  const bool mmd = statistic_kind == "mmd";
  std::optional<SgnnModel> model;
  if (method == "sgnn") {
    if (!config.has("checkpoint")) throw ConfigError("method sgnn needs --checkpoint");
    model = load_checkpoint(config.text("checkpoint"));
  } else {
    parse_baseline(method);
  }
  const auto baselines = baseline_config(config);
  const std::size_t tol = config.count("tol");
  auto stat = method_statistic(method, net, L, baselines, model ? &*model : nullptr, mmd);

  json calibration = nullptr;
  std::optional<double> theta;
  const auto theta_text = config.text("theta");
  if (theta_text == "auto") {
    Calibration cal;
    std::string source;
    if (config.has("calibration-network")) {
      const auto other = load_network(config.text("calibration-network"));
      const auto s = method_statistic(method, other, L, baselines, model ? &*model : nullptr, mmd);
      cal = calibrate_threshold(s.statistic, other.change_points(), L, s.orientation, tol);
      source = config.text("calibration-network");
    } else {
      const double tf = config.real("train-frac");
      const double vf = config.real("val-frac");
      const auto split = split_sequence(net.length(), tf, vf, 1.0 - tf - vf);
      const auto zv = restrict_series(stat.statistic, split.validation);
      if (zv.empty()) throw ParameterError("validation range holds no statistic values; lower L or widen val-frac");
      cal = calibrate_threshold(zv, points_in(net.change_points(), split.validation), L, stat.orientation, tol);
      source = "validation range [" + std::to_string(split.validation.first) + ", " +
               std::to_string(split.validation.last) + "]";
    }
    theta = cal.theta;
    calibration = {{"source", source}, {"f1", cal.f1}, {"candidates", cal.candidates.size()}};
    if (!cal.warning.empty()) calibration["warning"] = cal.warning;
  } else if (theta_text != "none") {
    theta = config.real("theta");
  }

  DetectionTrace trace;
  if (theta) {
    trace = make_trace(stat.statistic, L, *theta, stat.orientation);
  } else {
    trace.statistic = stat.statistic;
    trace.window = L;
    trace.orientation = stat.orientation;
    trace.threshold = std::numeric_limits<double>::quiet_NaN();
  }
  const auto mode_text = config.text("localisation");
  Localisation mode = Localisation::ArgMin;
  if (mode_text == "max-increment") {
    mode = Localisation::MaxIncrement;
  } else if (mode_text != "argmin") {
    throw ConfigError("localisation must be argmin or max-increment");
  }
  const auto localised = localize_single_offline(stat.statistic, mode, stat.orientation);

  ensure_output_dir(config);
  const auto name = config.text("name");
  const auto trace_path = config.output_path(name + "_trace.csv");
  save_trace_csv(trace_path, trace, config.provenance());
  json result{{"command", "detect"},
              {"config_hash", config.hash()},
              {"seed", config.seed()},
              {"method", method},
              {"L", L},
              {"orientation", to_string(stat.orientation)},
              {"theta", theta ? json(*theta) : json(nullptr)},
              {"declared", trace.declared},
              {"localised", localised},
              {"calibration", calibration},
              {"warnings", stat.warnings},
              {"trace", trace_path}};
  const auto& truth = net.change_points();
  if (!truth.empty()) {
    result["truth"] = truth;
    if (theta) {
      const auto score = adjusted_f1(trace.declared, truth, net.length(), tol);
      result["adjusted_f1"] = {{"precision", score.precision}, {"recall", score.recall}, {"f1", score.f1}};
    }
    if (truth.size() == 1) result["localisation_error"] = localisation_error(localised, truth.front());
  }
  if (config.flag("increments")) {
    const auto inc = increments(stat.statistic);
    const auto inc_path = config.output_path(name + "_increments.csv");
    std::ofstream f(inc_path);
    if (!f) throw IoError("cannot open '" + inc_path + "' for writing");
    f << "# " << config.provenance() << "\nt,increment\n" << std::setprecision(17);
    for (std::size_t i = 0; i < inc.size(); ++i) f << inc.first + i << ',' << inc.values[i] << '\n';
    result["increments"] = inc_path;
  }
  write_json_file(config.output_path(name + "_cps.json"), result);
  out << result.dump() << '\n';
}

void cmd_selfsup_labels(const RunConfig& config, std::ostream& out) {
  if (!config.has("input")) throw ConfigError("selfsup-labels needs --input");
  const auto input = config.text("input");
  std::vector<Matrix> corr;
  if (std::filesystem::path(input).extension() == ".jsonl") {
    corr = load_matrices_jsonl(input);
  } else {
    corr = windowed_correlations(load_panel_csv(input), config.count("window"));
  }
  if (corr.empty()) throw ParameterError("no correlation matrices in '" + input + "'");
  SelfsupConfig sc;
  sc.clusters = config.count("clusters");
  sc.seed = config.seed();
  if (config.has("k")) {
    sc.k_candidates = {config.count("k")};
  } else {
    const auto lo = config.count("k-min");
    const auto hi = std::min(config.count("k-max"), corr.front().rows());
    if (lo > hi) throw ConfigError("k-min exceeds k-max (or the node count)");
    sc.k_candidates.clear();
    for (auto k = lo; k <= hi; ++k) sc.k_candidates.push_back(k);
  }
  const auto r = selfsup_pipeline(corr, sc);
  ensure_output_dir(config);
  const auto name = config.text("name");
  json result{{"command", "selfsup-labels"},
              {"config_hash", config.hash()},
              {"seed", config.seed()},
              {"change_points", r.change_points},
              {"k", r.k},
              {"k_candidates", sc.k_candidates},
              {"silhouette", r.silhouette},
              {"clusters", sc.clusters},
              {"snapshot_labels", r.snapshot_labels}};
  if (config.has("network")) {
    FileMeta meta;
    const auto net = load_network(config.text("network"), &meta);
    if (net.length() != corr.size())
      throw ParameterError("network has " + std::to_string(net.length()) + " snapshots but " +
                           std::to_string(corr.size()) + " correlation matrices were clustered");
    const auto path = config.output_path(name + "_" + path_stem(config.text("network")) + ".jsonl");
    save_network(path, DynamicNetwork(net.snapshots(), r.change_points, net.labels()),
                 file_meta(config, config.seed()));
    result["network"] = path;
  }
  const auto path = config.output_path(name + ".json");
  write_json_file(path, result);
  out << result.dump() << '\n';
}

}  // namespace ncpd::cli
