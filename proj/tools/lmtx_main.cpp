#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmtx/commands.hpp"
#include "lmtx/config.hpp"
#include "lmtx/error.hpp"

namespace {

struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  bool print_config = false;
};

void report_error(const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"train and serve a label retriever distilled from teacher judgments"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "validate and normalize a dataset into the run directory"},
      {"train", "run the full teacher-guided training loop"},
      {"infer", "retrieve top labels for every document with a trained checkpoint"},
      {"eval", "score saved predictions against ground truth"},
      {"cache-stats", "summarize a judgment cache file"},
      {"synth", "generate the synthetic topical benchmark"},
      {"sweep", "train across shortlist sizes and report final test metrics"},
  };
  std::map<std::string, CommandOptions> options;
  for (const auto& [name, description] : commands) {
    auto* cmd = app.add_subcommand(name, description);
    auto& opt = options[name];
    cmd->add_option("--config", opt.config_path, "flat key = value configuration file");
    cmd->add_option("--set", opt.overrides, "override a config key (key=value, repeatable)");
    cmd->add_flag("--print-config", opt.print_config,
                  "print the fully resolved configuration and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    report_error("UsageError", err.what());
    return 1;
  }

  const auto& name = app.get_subcommands().front()->get_name();
  const auto& opt = options[name];
  try {
    const auto cfg = lmtx::parse_config(opt.config_path, opt.overrides);
    if (opt.print_config) {
      lmtx::print_config(cfg, std::cout);
      return 0;
    }
    lmtx::run_command(name, cfg, std::cout);
    return 0;
  } catch (const lmtx::Error& err) {
    report_error(lmtx::error_code_name(err.code()), err.what());
    return lmtx::exit_code_for(err.code());
  } catch (const std::exception& err) {
    report_error("Internal", err.what());
    return 2;
  }
}
