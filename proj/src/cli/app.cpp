#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <map>
#include <ostream>

#include "ncpd/cli.hpp"
#include "ncpd/error.hpp"

namespace ncpd::cli {

namespace {

using Handler = void (*)(const RunConfig&, std::ostream&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{{"generate", cmd_generate},   {"ingest", cmd_ingest},
                                                {"train", cmd_train},         {"detect", cmd_detect},
                                                {"benchmark", cmd_benchmark}, {"selfsup-labels", cmd_selfsup_labels}};
  return h;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"generate", "Sample SBM sequences with one change-point (and labelled pair pools)"},
      {"ingest", "Turn a multivariate time series panel into a correlation network sequence"},
      {"train", "Train the siamese GCN similarity on labelled snapshot pairs"},
      {"detect", "Compute a change-point statistic and declare change-points"},
      {"benchmark", "Run the learned detector and the baselines over a grid of runs"},
      {"selfsup-labels", "Pre-estimate change-points by clustering correlation snapshots"}};
  return d;
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message, int code,
                 std::optional<std::size_t> line = std::nullopt) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  if (line) j["line"] = *line;
  err << j.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Network change-point detection toolkit", "ncpd"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::string> config_path;
  std::map<std::string, bool> print_config;
  for (const auto& command : kCommands) {
    auto* sub = app.add_subcommand(command, descriptions().at(command));
    sub->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    sub->add_option("--config", config_path[command], "key-value config file");
    sub->add_flag("--print-config", print_config[command], "print the resolved configuration and exit");
    for (const auto& key : schema(command)) {
      auto help = key.help;
      if (!key.default_value.empty()) help += " [" + key.default_value + "]";
      sub->add_option("--" + key.name, given[command][key.name], help)->type_name("VALUE");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what(), 2);
    return 2;
  }

  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();
  auto* sub = app.get_subcommand(command);

  try {
    std::map<std::string, std::string> overrides;
    for (const auto& key : schema(command))
      if (sub->count("--" + key.name) > 0) overrides[key.name] = given[command][key.name];
    std::optional<ConfigFile> file;
    if (!config_path[command].empty()) file = load_config_file(config_path[command]);
    const auto config = resolve_config(command, file ? &*file : nullptr, overrides);
    if (print_config[command]) {
      nlohmann::json j{{"command", command}, {"config_hash", config.hash()}, {"values", config.values()}};
      out << j.dump(2) << '\n';
      return 0;
    }
    handlers().at(command)(config, out);
    return 0;
  } catch (const ConfigError& e) {
    write_error(err, e.kind(), e.what(), 2);
    return 2;
  } catch (const IoError& e) {
    write_error(err, e.kind(), e.what(), 3);
    return 3;
  } catch (const ParseError& e) {
    write_error(err, e.kind(), e.what(), 4, e.line());
    return 4;
  } catch (const Error& e) {
    write_error(err, e.kind(), e.what(), 5);
    return 5;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what(), 1);
    return 1;
  }
}

}  // namespace ncpd::cli
