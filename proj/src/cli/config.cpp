#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ncpd/cli.hpp"
#include "ncpd/error.hpp"

namespace ncpd::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<KeySpec> global_keys(const std::string& name) {
  return {{"seed", "0", "base random seed"},
          {"output-dir", "", "output directory (default: $NCPD_OUTPUT_DIR or .)"},
          {"name", name, "prefix of the written files"}};
}

std::vector<KeySpec> model_keys() {
  return {{"epochs", "100", "training epochs"},
          {"lr", "0.001", "Adam learning rate"},
          {"dropout", "0.05", "dropout rate"},
          {"sortk", "40", "Sort-k output size"},
          {"hidden", "32", "GCN hidden units"},
          {"layers", "2", "GCN layers"},
          {"fc1", "32", "first dense layer width"},
          {"fc2", "16", "second dense layer width"},
          {"encoding", "degree", "degree | rw:k | laplacian:k | identity"},
          {"pooling", "sortk", "sortk | max | average"},
          {"weight-decay", "0", "decoupled weight decay"},
          {"batch-size", "32", "mini-batch size"},
          {"grid", "none", "none | default-synthetic | default-financial"}};
}

std::vector<KeySpec> baseline_keys() {
  return {{"k-spectral", "6", "eigenvectors / singular values for spectral baselines"},
          {"window-half", "", "CUSUM and SC-NCPD half window (default L/2)"},
          {"deltacon-epsilon", "", "DeltaCon epsilon (default 1/(1+max degree))"},
          {"wl-iterations", "5", "WL refinement iterations"}};
}

std::vector<KeySpec> join(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::map<std::string, std::vector<KeySpec>> build_schemas() {
  std::map<std::string, std::vector<KeySpec>> s;
  s["generate"] = join(global_keys("sequence"),
                       {{"scenario", "merge", "merge | birth1 | birth2 | swaps"},
                        {"level", "", "difficulty level (alias: p, s, h)"},
                        {"p", "", "intra-community probability (merge, birth2)"},
                        {"s", "", "planted community size (birth1)"},
                        {"h", "", "fraction of swapped nodes (swaps)"},
                        {"n", "400", "number of nodes"},
                        {"T", "100", "sequence length"},
                        {"tau", "", "change-point (default: uniform in [T/4, 3T/4])"},
                        {"seeds", "1", "number of sequences"},
                        {"pairs", "0", "size of an independent labelled pair pool per sequence"}});
  s["ingest"] = join(global_keys("network"),
                     {{"input", "", "panel CSV, one row per series"},
                      {"window", "100", "observations per correlation window"},
                      {"method", "quantile", "quantile | threshold"},
                      {"q-low", "0.1", "lower pooled quantile"},
                      {"q-high", "0.9", "upper pooled quantile"},
                      {"eta", "0.2", "absolute correlation threshold"},
                      {"attributes", "", "long-format attribute CSV (t,node,attr...)"},
                      {"change-points", "", "comma list or JSON file of change-points"},
                      {"save-correlations", "false", "also write the correlation matrices"}});
  s["train"] = join(join(global_keys("model"),
                         {{"network", "", "dynamic network JSONL"},
                          {"pairs", "", "training pair CSV"},
                          {"val", "", "validation pair CSV"},
                          {"change-points", "", "comma list or JSON file overriding the network's"},
                          {"train-frac", "0.5", "training share of the sequence"},
                          {"val-frac", "0.2", "validation share of the sequence"},
                          {"n-pairs", "", "random-scheme pairs (default 10 per timestamp)"},
                          {"L", "12", "windowed-scheme width for validation pairs"}}),
                    model_keys());
  s["detect"] = join(join(global_keys("detect"),
                          {{"network", "", "dynamic network JSONL"},
                           {"method", "sgnn", "sgnn or a baseline identifier"},
                           {"checkpoint", "", "model checkpoint (method sgnn)"},
                           {"statistic", "average", "average | mmd (method sgnn)"},
                           {"L", "6", "window size"},
                           {"theta", "none", "none | auto | threshold value"},
                           {"calibration-network", "", "labelled network used by theta=auto"},
                           {"train-frac", "0.5", "training share when calibrating on the input"},
                           {"val-frac", "0.2", "validation share when calibrating on the input"},
                           {"tol", "5", "adjusted-F1 tolerance"},
                           {"localisation", "argmin", "argmin | max-increment"},
                           {"increments", "false", "also write |Z_t - Z_{t-1}|"}}),
                     baseline_keys());
  s["benchmark"] = join(join(join(global_keys("benchmark"),
                                  {{"preset", "none",
                                    "none | window-sensitivity | pooling | individual | cross-individual | loso"},
                                   {"protocol", "synthetic", "synthetic | individual | cross-individual | loso"},
                                   {"scenario", "merge", "synthetic scenario"},
                                   {"levels", "0.5", "comma list of difficulty levels"},
                                   {"seeds", "10", "runs per level"},
                                   {"n", "100", "number of nodes"},
                                   {"T", "100", "sequence length"},
                                   {"pairs", "200", "labelled pairs per run (60/20/20 split)"},
                                   {"L", "6", "comma list of window sizes"},
                                   {"methods", "sgnn,frobenius,procrustes,deltacon,wl,sc-ncpd,lad,cusum,cusum2",
                                    "comma list of methods"},
                                   {"poolings", "sortk", "comma list of s-GNN poolings"},
                                   {"networks", "", "comma list of labelled networks (activity protocols)"},
                                   {"train-networks", "", "training networks (cross-individual)"},
                                   {"train-frac", "0.5", "training share (individual)"},
                                   {"val-frac", "0.2", "validation share (individual)"},
                                   {"n-pairs", "", "random-scheme pairs per network"},
                                   {"val-L", "12", "windowed-scheme width for validation pairs"},
                                   {"tol", "5", "adjusted-F1 tolerance"},
                                   {"workers", "0", "parallel runs (0: hardware concurrency)"}}),
                             model_keys()),
                        baseline_keys());
  s["selfsup-labels"] = join(global_keys("labels"),
                             {{"input", "", "panel CSV (with window) or correlation JSONL"},
                              {"window", "100", "observations per correlation window (panel input)"},
                              {"k", "", "fixed node-cluster count (overrides k-min/k-max)"},
                              {"k-min", "10", "smallest node-cluster count tried"},
                              {"k-max", "20", "largest node-cluster count tried"},
                              {"clusters", "9", "snapshot clusters C"},
                              {"network", "", "network to copy with the estimated change-points"}});
  return s;
}

const std::map<std::string, std::vector<KeySpec>>& schemas() {
  static const auto s = build_schemas();
  return s;
}

// Preset values sit between defaults and user-supplied values.
std::map<std::string, std::string> preset_values(const std::string& preset) {
  if (preset == "none") return {};
  if (preset == "window-sensitivity") return {{"L", "6,12,24"}, {"scenario", "merge"}, {"levels", "0.07,0.13,0.2"}};
  if (preset == "pooling") return {{"poolings", "sortk,max,average"}, {"methods", "sgnn"}};
  if (preset == "individual" || preset == "cross-individual" || preset == "loso")
    return {{"protocol", preset}, {"encoding", "identity"}, {"L", "20"}};
  throw ConfigError("unknown preset '" + preset + "'");
}

}  // namespace

const std::vector<KeySpec>& schema(const std::string& command) {
  const auto it = schemas().find(command);
  if (it == schemas().end()) throw ConfigError("unknown command '" + command + "'");
  return it->second;
}

ConfigFile parse_config_text(std::istream& in) {
  ConfigFile f;
  std::map<std::string, std::string>* target = &f.common;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      const auto section = trim(line.substr(1, line.size() - 2));
      if (std::find(kCommands.begin(), kCommands.end(), section) == kCommands.end())
        throw ParseError("unknown section '" + section + "'", line_no);
      target = &f.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    (*target)[key] = trim(line.substr(eq + 1));
  }
  return f;
}

ConfigFile load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config_text(in);
}

RunConfig resolve_config(const std::string& command, const ConfigFile* file,
                         const std::map<std::string, std::string>& overrides) {
  const auto& keys = schema(command);
  std::map<std::string, std::string> values;
  for (const auto& k : keys) values[k.name] = k.default_value;
  auto known = [&](const std::string& key) { return values.count(key) > 0; };

  std::map<std::string, std::string> user;
  auto layer = [&](const std::map<std::string, std::string>& m, const char* origin) {
    for (const auto& [k, v] : m) {
      if (!known(k)) throw ConfigError("unknown key '" + k + "' for " + command + " (" + origin + ")");
      user[k] = v;
    }
  };
  if (file) {
    // Common keys that belong to another command are tolerated.
    for (const auto& [k, v] : file->common)
      if (known(k)) user[k] = v;
    const auto sec = file->sections.find(command);
    if (sec != file->sections.end()) layer(sec->second, "config file");
  }
  layer(overrides, "command line");

  if (command == "benchmark") {
    const auto preset = user.count("preset") ? user.at("preset") : values.at("preset");
    for (const auto& [k, v] : preset_values(preset)) values[k] = v;
  }
  for (const auto& [k, v] : user) values[k] = v;

  if (values["output-dir"].empty()) {
    const char* env = std::getenv("NCPD_OUTPUT_DIR");
    values["output-dir"] = env && *env ? env : ".";
  }
  RunConfig config(command, std::move(values));
  config.seed();  // validates
  return config;
}

RunConfig::RunConfig(std::string command, std::map<std::string, std::string> values)
    : command_(std::move(command)), values_(std::move(values)) {}

bool RunConfig::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("key '" + key + "' is not defined for " + command_);
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto v = text(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::size_t RunConfig::count(const std::string& key) const {
  const auto v = text(key);
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + v + "'");
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' is out of range: '" + v + "'");
  }
}

bool RunConfig::flag(const std::string& key) const {
  const auto v = text(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(text(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : list(key)) out.push_back(RunConfig(command_, {{key, item}}).real(key));
  return out;
}

std::vector<std::size_t> RunConfig::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : list(key)) out.push_back(RunConfig(command_, {{key, item}}).count(key));
  return out;
}

std::string RunConfig::output_path(const std::string& file) const {
  return (std::filesystem::path(output_dir()) / file).string();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  std::string canonical = command_ + '\n';
  for (const auto& [k, v] : values_)
    if (k != "output-dir" && k != "workers") canonical += k + '=' + v + '\n';
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical);
  return out.str();
}

std::string RunConfig::provenance() const {
  return "config_hash=" + hash() + " seed=" + std::to_string(seed());
}

}  // namespace ncpd::cli
