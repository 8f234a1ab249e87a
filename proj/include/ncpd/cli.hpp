#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ncpd::cli {

/// Documented key of a subcommand: name, default value and one-line help.
struct KeySpec {
  std::string name;
  std::string default_value;
  std::string help;
};

inline const std::vector<std::string> kCommands{"generate", "ingest", "train", "detect", "benchmark", "selfsup-labels"};

/// Keys accepted by `command`, global keys (seed, output-dir, name) included.
const std::vector<KeySpec>& schema(const std::string& command);

/// Values read from a key-value file. Keys before the first "[section]" apply
/// to every command; a "[command]" section applies to that command only.
struct ConfigFile {
  std::map<std::string, std::string> common;
  std::map<std::string, std::map<std::string, std::string>> sections;
};

/// "key = value" lines; '#' starts a comment; blank lines ignored.
ConfigFile parse_config_text(std::istream& in);
ConfigFile load_config_file(const std::string& path);

/// Effective configuration of one run.
class RunConfig {
 public:
  RunConfig() = default;
  RunConfig(std::string command, std::map<std::string, std::string> values);

  const std::string& command() const noexcept { return command_; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  bool has(const std::string& key) const;  // present and nonempty
  std::string text(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;  // comma-separated
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(count("seed")); }
  std::string output_dir() const { return text("output-dir"); }
  /// Path inside the output directory.
  std::string output_path(const std::string& file) const;

  /// FNV-1a (64-bit, hex) of the sorted "key=value" lines; output-dir and workers excluded.
  std::string hash() const;
  /// "config_hash=<hash> seed=<seed>" for CSV comment lines.
  std::string provenance() const;

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

/// Layers defaults, preset values, file values and command-line values (later
/// layers win) and rejects keys outside the command's schema.
RunConfig resolve_config(const std::string& command, const ConfigFile* file,
                         const std::map<std::string, std::string>& overrides);

std::uint64_t fnv1a64(const std::string& bytes);

/// Parses argv, runs the subcommand, writes a JSON error object to `err` on
/// failure. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Subcommands; each writes its files under the output directory and a JSON
// summary line to `out`.
void cmd_generate(const RunConfig& config, std::ostream& out);
void cmd_ingest(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_detect(const RunConfig& config, std::ostream& out);
void cmd_benchmark(const RunConfig& config, std::ostream& out);
void cmd_selfsup_labels(const RunConfig& config, std::ostream& out);

}  // namespace ncpd::cli
